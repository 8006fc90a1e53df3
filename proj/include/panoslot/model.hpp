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

#ifndef PANOSLOT_MODEL_HPP_
#define PANOSLOT_MODEL_HPP_

#include <vector>

#include "panoslot/model_config.hpp"
#include "panoslot/nn.hpp"
#include "panoslot/pipeline.hpp"

namespace panoslot {

// FFN followed by a classifier over K classes + 1 no-object entry (last).
template <typename S>
class ClassHead {
 public:
  ClassHead() = default;
  ClassHead(ParameterStore<S>& store, const std::string& name,
            std::size_t channels, std::size_t num_classes)
      : ffn_(store, name + ".ffn", channels, channels),
        classifier_(store, name + ".classifier", channels, num_classes + 1) {}

  // [L, K+1] logits.
  Var<S> operator()(const Var<S>& slots) const {
    return classifier_(gelu(ffn_(slots)));
  }

  Linear<S>& classifier() { return classifier_; }

 private:
  FeedForward<S> ffn_;
  Linear<S> classifier_;
};

// Mask logits are slot embeddings times pixel embeddings. Pixel embeddings
// are the stride-4 fused map plus its position embedding.
template <typename S>
class MaskHead {
 public:
  MaskHead() = default;
  MaskHead(ParameterStore<S>& store, const std::string& name,
           std::size_t channels)
      : ffn_(store, name + ".ffn", channels, channels), channels_(channels) {}

  Var<S> slot_embeddings(const Var<S>& slots) const { return ffn_(slots); }

  // [h, w, C] map -> [h*w, C].
  Var<S> pixel_embeddings(const Var<S>& features) const {
    const std::size_t h = features.dim(0), w = features.dim(1);
    Tape<S>& tape = features.tape();
    return add(reshape(features, {h * w, channels_}),
               tape.constant(sinusoidal_position_embedding<S>(h, w, channels_)));
  }

  // [L, C] x [D, C] -> [L, D].
  Var<S> logits(const Var<S>& slot_embed, const Var<S>& pixel_embed) const {
    if (slot_embed.dim(1) != pixel_embed.dim(1)) {
      throw ShapeError("mask head: channel mismatch " +
                       shape_string(slot_embed.shape()) + " vs " +
                       shape_string(pixel_embed.shape()));
    }
    return matmul(slot_embed, transpose(pixel_embed));
  }

 private:
  FeedForward<S> ffn_;
  std::size_t channels_ = 0;
};

// Bilinearly resamples [L, h*w] mask logits to [L, H*W].
template <typename S>
Var<S> upsample_mask_logits(const Var<S>& logits, std::size_t h, std::size_t w,
                            std::size_t out_h, std::size_t out_w) {
  const std::size_t l = logits.dim(0);
  Var<S> maps = reshape(transpose(logits), {h, w, l});
  Var<S> up = bilinear_resize(maps, out_h, out_w);
  return transpose(reshape(up, {out_h * out_w, l}));
}

template <typename S>
struct FrameOutputs {
  Var<S> slots;            // [L, C]
  Var<S> class_logits;     // [L, K+1]
  Var<S> mask_logits;      // [L, H*W], full input resolution
  Var<S> pixel_embed;      // [h*w, C], stride 4
  Var<S> mask_embed;       // [L, C]
  Var<S> id_embed;         // [L, C]
  std::size_t height = 0, width = 0;          // input resolution
  std::size_t feat_height = 0, feat_width = 0;  // stride-4 resolution
};

template <typename S>
struct ModelOutputs {
  std::vector<FrameOutputs<S>> frames;
  std::vector<StageTrace> trace;
  std::size_t modules_executed = 0;
};

// Complete network: VPR pipeline plus class, mask and ID heads.
template <typename S>
class PanopticSlotModel {
 public:
  explicit PanopticSlotModel(const ModelConfig& cfg)
      : cfg_(cfg),
        store_(cfg.seed),
        pipeline_(store_, cfg),
        class_head_(store_, "head.class", cfg.channels, cfg.num_classes()),
        mask_head_(store_, "head.mask", cfg.channels),
        id_head_(store_, "head.id.ffn", cfg.channels, cfg.channels) {}

  PanopticSlotModel(const PanopticSlotModel&) = delete;
  PanopticSlotModel& operator=(const PanopticSlotModel&) = delete;

  ModelOutputs<S> forward(
      Tape<S>& tape, const std::vector<Tensor<S>>& frames,
      std::vector<AttentionRecord<S>>* attention = nullptr) const {
    PipelineOutput<S> p = pipeline_(tape, frames, attention);
    ModelOutputs<S> out;
    out.trace = p.trace;
    out.modules_executed = p.modules_executed;
    for (std::size_t f = 0; f < frames.size(); ++f) {
      FrameOutputs<S> fo;
      fo.slots = p.slots[f];
      fo.height = frames[f].dim(0);
      fo.width = frames[f].dim(1);
      fo.feat_height = p.mask_features[f].dim(0);
      fo.feat_width = p.mask_features[f].dim(1);
      fo.class_logits = class_head_(fo.slots);
      fo.mask_embed = mask_head_.slot_embeddings(fo.slots);
      fo.pixel_embed = mask_head_.pixel_embeddings(p.mask_features[f]);
      Var<S> low = mask_head_.logits(fo.mask_embed, fo.pixel_embed);
      fo.mask_logits = upsample_mask_logits(low, fo.feat_height, fo.feat_width,
                                            fo.height, fo.width);
      fo.id_embed = id_head_(fo.slots);
      out.frames.push_back(fo);
    }
    return out;
  }

  const ModelConfig& config() const { return cfg_; }
  ParameterStore<S>& parameters() { return store_; }
  const ParameterStore<S>& parameters() const { return store_; }
  VprPipeline<S>& pipeline() { return pipeline_; }

 private:
  ModelConfig cfg_;
  ParameterStore<S> store_;
  VprPipeline<S> pipeline_;
  ClassHead<S> class_head_;
  MaskHead<S> mask_head_;
  FeedForward<S> id_head_;
};

}  // namespace panoslot

#endif  // PANOSLOT_MODEL_HPP_
