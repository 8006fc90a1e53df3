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

#ifndef PANOSLOT_INFERENCE_HPP_
#define PANOSLOT_INFERENCE_HPP_

#include <filesystem>
#include <vector>

#include "panoslot/datagen.hpp"
#include "panoslot/metrics.hpp"
#include "panoslot/model.hpp"
#include "panoslot/postprocess.hpp"

namespace panoslot {

struct InferenceConfig {
  FilterConfig filter;
  double tau_id = 0.3;
  TrackMatching matching = TrackMatching::kGreedy;

  void validate() const;
};

// Runs the model over a video as a chain of overlapping frame pairs. Frames
// 0 and 1 come from the pair (0, 1); frame t >= 2 is the second output of
// the pair (t-1, t). Track ids follow ID-embedding similarity between
// consecutive predicted frames. With `attention`, retriever maps of every
// pair run are appended (frame indices are global).
template <typename S>
Video predict_video(const PanopticSlotModel<S>& model, const std::vector<Image>& frames,
                    const InferenceConfig& cfg,
                    std::vector<AttentionRecord<S>>* attention = nullptr);

template <typename S>
std::vector<Video> predict_dataset(const PanopticSlotModel<S>& model,
                                   const std::vector<Clip>& clips,
                                   const InferenceConfig& cfg);

// Mean per-pixel entropy (nats) of the slot distribution, per stage.
template <typename S>
std::vector<double> attention_entropy_by_stage(const std::vector<AttentionRecord<S>>& records,
                                               std::size_t num_stages = 4);

// One 32-bit float plane per (record, slot) plus attention.json describing
// each plane. Returns the number of planes written.
template <typename S>
std::size_t write_attention(const std::filesystem::path& dir,
                            const std::vector<AttentionRecord<S>>& records);

// pred_%04d.pgm (16-bit ids) + pred_%04d.json (segment list) per frame.
void write_predictions(const std::filesystem::path& dir, const Video& video);

}  // namespace panoslot

#endif  // PANOSLOT_INFERENCE_HPP_
