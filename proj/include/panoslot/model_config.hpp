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

#ifndef PANOSLOT_MODEL_CONFIG_HPP_
#define PANOSLOT_MODEL_CONFIG_HPP_

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "panoslot/errors.hpp"
#include "panoslot/retriever.hpp"

namespace panoslot {

// Architecture hyper-parameters. Defaults are the desk-scale toy setting.
struct ModelConfig {
  std::size_t channels = 32;
  std::size_t backbone_width = 32;
  std::size_t num_slots = 8;
  // VPR modules per stage, coarsest scale (stride 32) first.
  std::vector<std::size_t> schedule = {1, 2, 2, 2};
  std::size_t ffn_hidden = 256;
  bool video_retriever = true;
  SoftmaxDim softmax_dim = SoftmaxDim::kSlot;
  bool retriever_output_projection = false;
  double retriever_logit_scale = 1.0;
  std::size_t num_thing_classes = 3;
  std::size_t num_stuff_classes = 3;
  double slot_init_std = 0.02;
  std::uint64_t seed = 0;

  std::size_t num_classes() const {
    return num_thing_classes + num_stuff_classes;
  }
  std::size_t total_modules() const {
    return std::accumulate(schedule.begin(), schedule.end(), std::size_t{0});
  }
  RetrieverConfig retriever() const {
    return {channels, softmax_dim, retriever_output_projection,
            retriever_logit_scale};
  }

  void validate() const {
    if (channels == 0 || channels % 4 != 0) {
      throw ConfigError("model.channels must be a positive multiple of 4");
    }
    if (backbone_width == 0) throw ConfigError("model.backbone_width must be > 0");
    if (num_slots == 0) throw ConfigError("model.num_slots must be > 0");
    if (schedule.size() != 4) {
      throw ConfigError("model.schedule must list 4 per-scale module counts");
    }
    if (ffn_hidden == 0) throw ConfigError("model.ffn_hidden must be > 0");
    if (num_classes() == 0) throw ConfigError("model needs at least one class");
    if (!(slot_init_std >= 0)) throw ConfigError("model.slot_init_std < 0");
  }
};

}  // namespace panoslot

#endif  // PANOSLOT_MODEL_CONFIG_HPP_
