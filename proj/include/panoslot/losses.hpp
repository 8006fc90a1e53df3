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

#ifndef PANOSLOT_LOSSES_HPP_
#define PANOSLOT_LOSSES_HPP_

#include <utility>
#include <vector>

#include "panoslot/model.hpp"
#include "panoslot/panoptic.hpp"
#include "panoslot/postprocess.hpp"

namespace panoslot {

struct LossWeights {
  double pq = 3.0;
  double inst_disc = 1.0;
  double mask_id_ce = 0.3;
  double semseg = 0.5;
  double id = 0.5;

  void validate() const;
};

// Slot <-> ground-truth segment assignment for one frame.
struct FrameMatch {
  // (slot index, index into PanopticFrame::segments), sorted by slot.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::size_t> unmatched_slots;
  double total_cost = 0.0;
};

using MatchResult = std::vector<FrameMatch>;

// Dice smoothing used by both the matching cost and the loss.
inline constexpr double kDiceEps = 1.0;

// cost[slot, seg] = -p_slot(class_seg) * Dice(Q_slot, M_seg) over non-void
// pixels, solved optimally. With more segments than slots this throws
// ConfigError unless `allow_partial`, in which case only L segments are
// matched.
FrameMatch match_slots(const ClassPrediction& cls, const MaskPrediction& masks,
                       const PanopticFrame& gt, bool allow_partial = false);

// Matching cost matrix [L, #segments] as used by match_slots.
Eigen::MatrixXd matching_cost(const ClassPrediction& cls, const MaskPrediction& masks,
                              const PanopticFrame& gt);

// Extracts double-precision predictions from recorded head outputs.
template <typename S>
ClassPrediction class_prediction(const FrameOutputs<S>& f);
template <typename S>
MaskPrediction mask_prediction(const FrameOutputs<S>& f);

struct LossOptions {
  LossWeights weights;
  double disc_temperature = 0.3;
  double id_temperature = 0.1;
  // Share of the class term carried by matched slots; unmatched (no-object)
  // slots carry the rest, each side a mean over its slots. Negative: one
  // plain mean over all slots.
  double positive_weight = -1.0;
  bool allow_partial_match = false;
};

template <typename S>
struct LossBreakdown {
  Var<S> total;
  double pq = 0, inst_disc = 0, mask_id_ce = 0, semseg = 0, id = 0;
};

// Per-frame terms are averaged over frames; the id term over consecutive
// frame pairs. Thing correspondences follow track ids, stuff follows class.
template <typename S>
LossBreakdown<S> total_loss(const std::vector<FrameOutputs<S>>& outputs,
                            const std::vector<PanopticFrame>& gt,
                            const MatchResult& match, std::size_t num_classes,
                            const LossOptions& options = {});

// Computes the matching for every frame and then total_loss.
template <typename S>
LossBreakdown<S> matched_loss(const std::vector<FrameOutputs<S>>& outputs,
                              const std::vector<PanopticFrame>& gt,
                              std::size_t num_classes, const LossOptions& options,
                              MatchResult* match_out = nullptr);

}  // namespace panoslot

#endif  // PANOSLOT_LOSSES_HPP_
