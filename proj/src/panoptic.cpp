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

#include "panoslot/panoptic.hpp"

#include <map>
#include <set>

namespace panoslot {

void validate_frame(const PanopticFrame& frame) {
  if (frame.ids.size() != frame.pixels()) {
    throw ConfigError("panoptic frame: id map has " +
                      std::to_string(frame.ids.size()) + " pixels, expected " +
                      std::to_string(frame.pixels()));
  }
  std::set<std::uint16_t> ids;
  for (const auto& s : frame.segments) {
    if (s.id == kVoidId) throw ConfigError("panoptic frame: record uses void id 0");
    if (!ids.insert(s.id).second) {
      throw ConfigError("panoptic frame: duplicate segment id " +
                        std::to_string(s.id));
    }
    if (!s.is_thing && s.track_id != 0) {
      throw ConfigError("panoptic frame: stuff segment " + std::to_string(s.id) +
                        " has non-zero track id");
    }
    if (s.is_thing && s.track_id == 0) {
      throw ConfigError("panoptic frame: thing segment " + std::to_string(s.id) +
                        " has track id 0");
    }
  }
  for (std::uint16_t id : frame.ids) {
    if (id != kVoidId && !ids.count(id)) {
      throw ConfigError("panoptic frame: pixel id " + std::to_string(id) +
                        " has no segment record");
    }
  }
}

void validate_sequence(const std::vector<PanopticFrame>& frames) {
  std::map<std::uint32_t, std::uint32_t> track_class;
  for (const auto& f : frames) {
    validate_frame(f);
    if (f.height != frames.front().height || f.width != frames.front().width) {
      throw ConfigError("panoptic sequence: frame sizes differ");
    }
    std::set<std::uint32_t> seen;
    for (const auto& s : f.segments) {
      if (!s.is_thing) continue;
      if (!seen.insert(s.track_id).second) {
        throw ConfigError("panoptic sequence: track id " +
                          std::to_string(s.track_id) + " used twice in a frame");
      }
      auto [it, inserted] = track_class.emplace(s.track_id, s.class_id);
      if (!inserted && it->second != s.class_id) {
        throw ConfigError("panoptic sequence: track " +
                          std::to_string(s.track_id) + " changes class");
      }
    }
  }
}

}  // namespace panoslot
