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

#ifndef PANOSLOT_PIPELINE_HPP_
#define PANOSLOT_PIPELINE_HPP_

#include <array>
#include <string>
#include <vector>

#include "panoslot/model_config.hpp"
#include "panoslot/nn.hpp"
#include "panoslot/retriever.hpp"

namespace panoslot {

// Fixed 2-D sinusoidal encoding, [h*w, channels]. The first half of the
// channels encodes the row, the second half the column; within each half
// even/odd channels carry sin/cos of normalized coordinates scaled by 2*pi.
template <typename S>
Tensor<S> sinusoidal_position_embedding(std::size_t h, std::size_t w,
                                        std::size_t channels);

// Per-frame multi-scale maps. levels[0] has stride 4, levels[3] stride 32.
template <typename S>
struct FeaturePyramid {
  std::array<Var<S>, 4> levels;
};

// Stride-2 3x3 conv + GELU blocks, each level projected to the model width
// with a 1x1 conv. Input frames are [H, W, 3] with H, W divisible by 16; the
// stride-32 level is ceil(H/32) x ceil(W/32).
template <typename S>
class ToyBackbone {
 public:
  ToyBackbone() = default;
  ToyBackbone(ParameterStore<S>& store, const std::string& name,
              const ModelConfig& cfg);
  FeaturePyramid<S> operator()(const Var<S>& frame) const;

 private:
  Conv2d<S> stem_;
  std::array<Conv2d<S>, 4> down_;
  std::array<Conv2d<S>, 4> refine_;
  std::array<Conv2d<S>, 4> proj_;
};

// Upsamples `low` to the resolution of `high`, concatenates channels and
// projects back with a 1x1 conv. `low` must be ceil(high/2) in both axes.
template <typename S>
class Fuse {
 public:
  Fuse() = default;
  Fuse(ParameterStore<S>& store, const std::string& name,
       std::size_t channels);
  Var<S> operator()(const Var<S>& low, const Var<S>& high) const;
  Conv2d<S>& projection() { return proj_; }

 private:
  Conv2d<S> proj_;
};

// Self-attention -> Retriever over spatial features -> FFN, each followed by
// residual add and layer normalization. Keys carry the position embedding,
// values do not.
template <typename S>
class PanopticRetriever {
 public:
  PanopticRetriever() = default;
  PanopticRetriever(ParameterStore<S>& store, const std::string& name,
                    const ModelConfig& cfg);
  // slots [L, C]; features [D, C]; position [D, C]. Returns refined slots and
  // the [D, L] attention matrix.
  RetrieverOutput<S> operator()(const Var<S>& slots, const Var<S>& features,
                                const Var<S>& position) const;

 private:
  SelfAttention<S> sa_;
  LayerNorm<S> ln_sa_;
  Retriever<S> re_;
  LayerNorm<S> ln_re_;
  FeedForward<S> ffn_;
  LayerNorm<S> ln_ffn_;
};

// Cross-frame refinement: slots of all frames are concatenated along the slot
// axis, refined by a Retriever (Q = K = V) and an FFN, and the pre-Retriever
// slots are added back before splitting per frame. No trailing LN after the
// final addition. Parameter count does not depend on the frame count.
template <typename S>
class VideoRetriever {
 public:
  VideoRetriever() = default;
  VideoRetriever(ParameterStore<S>& store, const std::string& name,
                 const ModelConfig& cfg);
  std::vector<Var<S>> operator()(const std::vector<Var<S>>& slots,
                                 Var<S>* attention = nullptr) const;

 private:
  Retriever<S> re_;
  LayerNorm<S> ln_re_;
  FeedForward<S> ffn_;
  LayerNorm<S> ln_ffn_;
};

template <typename S>
struct VprModule {
  PanopticRetriever<S> panoptic;
  VideoRetriever<S> video;
};

// One Panoptic Retriever attention matrix captured during a forward pass.
template <typename S>
struct AttentionRecord {
  std::size_t frame = 0;
  std::size_t stage = 0;
  std::size_t module = 0;  // global VPR module index
  std::size_t height = 0, width = 0;
  Tensor<S> attention;  // [height*width, L]
};

struct StageTrace {
  std::size_t stage = 0;
  std::size_t stride = 0;
  std::size_t height = 0, width = 0;
  // Pyramid level consumed, and whether it was fused with the previous
  // stage's map.
  std::size_t level = 0;
  bool fused_with_previous = false;
  std::size_t modules = 0;
};

template <typename S>
struct PipelineOutput {
  std::vector<Var<S>> slots;           // per frame [L, C]
  std::vector<Var<S>> mask_features;   // per frame stride-4 map [h, w, C]
  std::vector<StageTrace> trace;
  std::size_t modules_executed = 0;
};

// Backbone, learnable panoptic slots, coarse-to-fine VPR stages and Fuse
// bridges.
template <typename S>
class VprPipeline {
 public:
  VprPipeline(ParameterStore<S>& store, const ModelConfig& cfg);

  PipelineOutput<S> operator()(
      Tape<S>& tape, const std::vector<Tensor<S>>& frames,
      std::vector<AttentionRecord<S>>* attention = nullptr) const;

  const ModelConfig& config() const { return cfg_; }
  Parameter<S>& slots() const { return *slots_; }
  ToyBackbone<S>& backbone() { return backbone_; }
  Fuse<S>& fuse(std::size_t i) { return fuses_.at(i); }

 private:
  ModelConfig cfg_;
  ToyBackbone<S> backbone_;
  Parameter<S>* slots_ = nullptr;
  std::vector<std::vector<VprModule<S>>> stages_;
  std::vector<Fuse<S>> fuses_;
};

}  // namespace panoslot

#endif  // PANOSLOT_PIPELINE_HPP_
