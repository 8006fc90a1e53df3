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

#include "panoslot/pipeline.hpp"

#include <cmath>
#include <numbers>

namespace panoslot {

template <typename S>
Tensor<S> sinusoidal_position_embedding(std::size_t h, std::size_t w,
                                        std::size_t channels) {
  if (channels == 0 || channels % 4 != 0) {
    throw ShapeError("position embedding needs channels divisible by 4");
  }
  const std::size_t half = channels / 2;
  Tensor<S> out({h * w, channels});
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double ey = static_cast<double>(y + 1) / static_cast<double>(h) * two_pi;
      const double ex = static_cast<double>(x + 1) / static_cast<double>(w) * two_pi;
      S* row = out.raw() + (y * w + x) * channels;
      for (std::size_t i = 0; i < half; ++i) {
        const double freq = std::pow(
            10000.0, static_cast<double>(2 * (i / 2)) / static_cast<double>(half));
        const double ay = ey / freq, ax = ex / freq;
        row[i] = static_cast<S>(i % 2 == 0 ? std::sin(ay) : std::cos(ay));
        row[half + i] = static_cast<S>(i % 2 == 0 ? std::sin(ax) : std::cos(ax));
      }
    }
  }
  return out;
}

template <typename S>
ToyBackbone<S>::ToyBackbone(ParameterStore<S>& store, const std::string& name,
                            const ModelConfig& cfg) {
  const std::size_t wb = cfg.backbone_width;
  stem_ = Conv2d<S>(store, name + ".stem", 3, 3, wb, 2);
  for (std::size_t l = 0; l < 4; ++l) {
    const std::string n = name + ".level" + std::to_string(l);
    down_[l] = Conv2d<S>(store, n + ".down", 3, wb, wb, 2);
    refine_[l] = Conv2d<S>(store, n + ".refine", 3, wb, wb, 1);
    proj_[l] = Conv2d<S>(store, n + ".proj", 1, wb, cfg.channels, 1);
  }
}

template <typename S>
FeaturePyramid<S> ToyBackbone<S>::operator()(const Var<S>& frame) const {
  if (frame.rank() != 3 || frame.dim(2) != 3) {
    throw ShapeError("backbone: frame must be [H, W, 3], got " +
                     shape_string(frame.shape()));
  }
  if (frame.dim(0) == 0 || frame.dim(1) == 0 || frame.dim(0) % 16 != 0 ||
      frame.dim(1) % 16 != 0) {
    throw ShapeError("backbone: frame size " + shape_string(frame.shape()) +
                     " must be divisible by 16");
  }
  FeaturePyramid<S> out;
  Var<S> x = gelu(stem_(frame));
  for (std::size_t l = 0; l < 4; ++l) {
    x = gelu(down_[l](x));
    x = gelu(refine_[l](x));
    out.levels[l] = proj_[l](x);
  }
  return out;
}

template <typename S>
Fuse<S>::Fuse(ParameterStore<S>& store, const std::string& name,
              std::size_t channels)
    : proj_(store, name + ".proj", 1, 2 * channels, channels, 1) {}

template <typename S>
Var<S> Fuse<S>::operator()(const Var<S>& low, const Var<S>& high) const {
  if (low.rank() != 3 || high.rank() != 3 || low.dim(2) != high.dim(2)) {
    throw ShapeError("fuse: expected two [H, W, C] maps with equal C, got " +
                     shape_string(low.shape()) + " and " +
                     shape_string(high.shape()));
  }
  const std::size_t h = high.dim(0), w = high.dim(1);
  if (low.dim(0) != (h + 1) / 2 || low.dim(1) != (w + 1) / 2) {
    throw ShapeError("fuse: " + shape_string(low.shape()) +
                     " is not half the resolution of " +
                     shape_string(high.shape()));
  }
  Var<S> up = bilinear_resize(low, h, w);
  return proj_(concat(std::vector<Var<S>>{up, high}, 2));
}

template <typename S>
PanopticRetriever<S>::PanopticRetriever(ParameterStore<S>& store,
                                        const std::string& name,
                                        const ModelConfig& cfg)
    : sa_(store, name + ".sa", cfg.channels),
      ln_sa_(store, name + ".ln_sa", cfg.channels),
      re_(store, name + ".re", cfg.retriever()),
      ln_re_(store, name + ".ln_re", cfg.channels),
      ffn_(store, name + ".ffn", cfg.channels, cfg.ffn_hidden),
      ln_ffn_(store, name + ".ln_ffn", cfg.channels) {}

template <typename S>
RetrieverOutput<S> PanopticRetriever<S>::operator()(
    const Var<S>& slots, const Var<S>& features, const Var<S>& position) const {
  Var<S> s = ln_sa_(add(slots, sa_(slots)));
  RetrieverOutput<S> r = re_(s, add(features, position), features);
  s = ln_re_(add(s, r.slots));
  s = ln_ffn_(add(s, ffn_(s)));
  return {s, r.attention};
}

template <typename S>
VideoRetriever<S>::VideoRetriever(ParameterStore<S>& store,
                                  const std::string& name,
                                  const ModelConfig& cfg)
    : re_(store, name + ".re", cfg.retriever()),
      ln_re_(store, name + ".ln_re", cfg.channels),
      ffn_(store, name + ".ffn", cfg.channels, cfg.ffn_hidden),
      ln_ffn_(store, name + ".ln_ffn", cfg.channels) {}

template <typename S>
std::vector<Var<S>> VideoRetriever<S>::operator()(
    const std::vector<Var<S>>& slots, Var<S>* attention) const {
  if (slots.empty()) throw ShapeError("video retriever: no frames");
  const Shape& ref = slots[0].shape();
  for (const auto& s : slots) {
    if (s.shape() != ref) {
      throw ShapeError("video retriever: frame slots " + shape_string(s.shape()) +
                       " differ from " + shape_string(ref));
    }
  }
  const std::size_t l = ref.at(0);
  Var<S> joint = slots.size() == 1 ? slots[0] : concat(slots, 0);
  RetrieverOutput<S> r = re_(joint, joint, joint);
  if (attention) *attention = r.attention;
  Var<S> refined = ln_re_(add(joint, r.slots));
  refined = ln_ffn_(add(refined, ffn_(refined)));
  Var<S> out = add(joint, refined);
  std::vector<Var<S>> per_frame;
  for (std::size_t f = 0; f < slots.size(); ++f) {
    per_frame.push_back(slots.size() == 1 ? out
                                          : slice(out, 0, f * l, (f + 1) * l));
  }
  return per_frame;
}

template <typename S>
VprPipeline<S>::VprPipeline(ParameterStore<S>& store, const ModelConfig& cfg)
    : cfg_(cfg) {
  cfg_.validate();
  backbone_ = ToyBackbone<S>(store, "backbone", cfg_);
  slots_ = &store.create("slots", {cfg_.num_slots, cfg_.channels},
                         InitSpec::normal(cfg_.slot_init_std));
  std::size_t module = 0;
  stages_.resize(4);
  for (std::size_t s = 0; s < 4; ++s) {
    for (std::size_t m = 0; m < cfg_.schedule[s]; ++m, ++module) {
      const std::string name = "vpr" + std::to_string(module);
      VprModule<S> vpr;
      vpr.panoptic = PanopticRetriever<S>(store, name + ".panoptic", cfg_);
      if (cfg_.video_retriever) {
        vpr.video = VideoRetriever<S>(store, name + ".video", cfg_);
      }
      stages_[s].push_back(std::move(vpr));
    }
    if (s > 0) {
      fuses_.emplace_back(store, "fuse" + std::to_string(s), cfg_.channels);
    }
  }
}

template <typename S>
PipelineOutput<S> VprPipeline<S>::operator()(
    Tape<S>& tape, const std::vector<Tensor<S>>& frames,
    std::vector<AttentionRecord<S>>* attention) const {
  if (frames.empty()) throw ShapeError("pipeline: no frames");
  const std::size_t t_count = frames.size();
  std::vector<FeaturePyramid<S>> pyramids;
  for (const auto& f : frames) {
    if (f.shape() != frames[0].shape()) {
      throw ShapeError("pipeline: frames differ in size");
    }
    pyramids.push_back(backbone_(tape.constant(f)));
  }

  PipelineOutput<S> out;
  Var<S> init = tape.parameter(*slots_);
  out.slots.assign(t_count, init);
  std::vector<Var<S>> maps(t_count);
  std::size_t module = 0;
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t level = 3 - s;
    for (std::size_t f = 0; f < t_count; ++f) {
      const Var<S>& raw = pyramids[f].levels[level];
      maps[f] = s == 0 ? raw : fuses_[s - 1](maps[f], raw);
    }
    const std::size_t h = maps[0].dim(0), w = maps[0].dim(1);
    out.trace.push_back({s, std::size_t{4} << level, h, w, level, s > 0,
                         stages_[s].size()});
    if (stages_[s].empty()) continue;

    Var<S> position =
        tape.constant(sinusoidal_position_embedding<S>(h, w, cfg_.channels));
    std::vector<Var<S>> flat(t_count);
    for (std::size_t f = 0; f < t_count; ++f) {
      flat[f] = reshape(maps[f], {h * w, cfg_.channels});
    }
    for (const auto& vpr : stages_[s]) {
      for (std::size_t f = 0; f < t_count; ++f) {
        RetrieverOutput<S> r = vpr.panoptic(out.slots[f], flat[f], position);
        out.slots[f] = r.slots;
        if (attention) {
          attention->push_back({f, s, module, h, w, r.attention.value()});
        }
      }
      if (cfg_.video_retriever) out.slots = vpr.video(out.slots);
      ++module;
    }
  }
  out.modules_executed = module;
  out.mask_features = maps;
  return out;
}

template Tensor<float> sinusoidal_position_embedding<float>(std::size_t,
                                                            std::size_t,
                                                            std::size_t);
template Tensor<double> sinusoidal_position_embedding<double>(std::size_t,
                                                              std::size_t,
                                                              std::size_t);
template class ToyBackbone<float>;
template class ToyBackbone<double>;
template class Fuse<float>;
template class Fuse<double>;
template class PanopticRetriever<float>;
template class PanopticRetriever<double>;
template class VideoRetriever<float>;
template class VideoRetriever<double>;
template class VprPipeline<float>;
template class VprPipeline<double>;

}  // namespace panoslot
