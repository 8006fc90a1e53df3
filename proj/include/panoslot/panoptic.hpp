/* Copyright 2026 The Panoslot Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef PANOSLOT_PANOPTIC_HPP_
#define PANOSLOT_PANOPTIC_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "panoslot/errors.hpp"

namespace panoslot {

// Segment id 0 is reserved for void pixels.
inline constexpr std::uint16_t kVoidId = 0;

struct SegmentInfo {
  std::uint16_t id = 0;
  std::uint32_t class_id = 0;
  bool is_thing = false;
  // Persistent object id for things; 0 for stuff.
  std::uint32_t track_id = 0;
  double confidence = 1.0;

  bool operator==(const SegmentInfo&) const = default;
};

// One annotated (or predicted) frame: a segment-id map plus records.
struct PanopticFrame {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint16_t> ids;  // row-major, height*width
  std::vector<SegmentInfo> segments;

  std::size_t pixels() const { return height * width; }
  const SegmentInfo* find(std::uint16_t id) const {
    for (const auto& s : segments) {
      if (s.id == id) return &s;
    }
    return nullptr;
  }

  bool operator==(const PanopticFrame&) const = default;
};

// Throws ConfigError describing the first violated invariant: map size,
// unique non-void record ids, every non-void pixel id has a record, stuff
// segments carry track id 0.
void validate_frame(const PanopticFrame& frame);

// Validates each frame and checks that a thing track keeps the same class
// across the sequence.
void validate_sequence(const std::vector<PanopticFrame>& frames);

}  // namespace panoslot

#endif  // PANOSLOT_PANOPTIC_HPP_
