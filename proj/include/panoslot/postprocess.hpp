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

#ifndef PANOSLOT_POSTPROCESS_HPP_
#define PANOSLOT_POSTPROCESS_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "panoslot/panoptic.hpp"

namespace panoslot {

// Per-slot class distribution, [L, K+1]; the last column is "no object".
struct ClassPrediction {
  Eigen::MatrixXd probs;

  std::size_t num_slots() const { return static_cast<std::size_t>(probs.rows()); }
  std::size_t num_classes() const {
    return static_cast<std::size_t>(probs.cols()) - 1;
  }
};

// Per-slot mask logits at frame resolution, [L, height*width].
struct MaskPrediction {
  std::size_t height = 0;
  std::size_t width = 0;
  Eigen::MatrixXd logits;

  // Softmax over slots at every pixel.
  Eigen::MatrixXd slot_probabilities() const;
  // Winning slot per pixel (lowest index on ties).
  std::vector<std::size_t> assignment() const;
};

struct FilterConfig {
  double class_conf = 0.85;
  double pixel_conf = 0.4;
  double overlap_ratio = 0.03;
  // Minimum stuff area in pixels at the reference resolution; scaled by the
  // ratio of frame area to reference area.
  double stuff_min_area = 4096;
  double reference_area = 1024.0 * 2048.0;

  double stuff_area_threshold(std::size_t height, std::size_t width) const {
    return stuff_min_area * static_cast<double>(height * width) / reference_area;
  }
  void validate() const;
};

// Converts one frame's slot predictions into a panoptic segmentation.
//
//  1. A slot survives if its best real class has probability >= class_conf.
//  2. Thing masks are {pixel : slot prob >= pixel_conf} restricted to pixels
//     whose winning slot is a thing slot; stuff masks are the pixels each
//     stuff slot wins. Masks therefore never depend on which slots survived.
//  3. Things are pasted in decreasing confidence; a thing whose overlap with
//     already pasted things exceeds overlap_ratio of its own area is dropped.
//  4. Stuff slots of one class are merged; merged stuff regions below the
//     area threshold are dropped.
//  5. Everything else is void.
//
// `track_ids` (one per slot) supplies thing track ids; without it thing slot
// l gets track l + 1. Classes [0, num_thing_classes) are things.
PanopticFrame postprocess(const ClassPrediction& cls, const MaskPrediction& masks,
                          std::size_t num_thing_classes, const FilterConfig& cfg,
                          const std::vector<std::uint32_t>* track_ids = nullptr);

// Slot -> persistent object id for one frame.
struct TrackAssignment {
  std::vector<std::uint32_t> ids;
  std::uint32_t next_id = 1;
};

enum class TrackMatching { kGreedy, kHungarian };

// Row-wise cosine similarity, [rows(a), rows(b)].
Eigen::MatrixXd cosine_similarity(const Eigen::MatrixXd& a,
                                  const Eigen::MatrixXd& b);

// Fresh ids 1..L for the first frame of a video.
TrackAssignment initial_tracks(std::size_t num_slots, std::uint32_t first_id = 1);

// Matches current slot embeddings to the previous frame's one-to-one
// (greedy highest-similarity-first, or optimal). Pairs with similarity >=
// threshold inherit the previous id; everything else gets a fresh id.
TrackAssignment assign_tracks(const Eigen::MatrixXd& current,
                              const Eigen::MatrixXd& previous,
                              const TrackAssignment& previous_tracks,
                              double threshold,
                              TrackMatching matching = TrackMatching::kGreedy);

}  // namespace panoslot

#endif  // PANOSLOT_POSTPROCESS_HPP_
