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

#ifndef PANOSLOT_TRAINER_HPP_
#define PANOSLOT_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "panoslot/datagen.hpp"
#include "panoslot/inference.hpp"
#include "panoslot/losses.hpp"
#include "panoslot/metrics.hpp"
#include "panoslot/model_config.hpp"
#include "panoslot/optimizer.hpp"

namespace panoslot {

// How training samples are drawn from a clip.
enum class DataMode {
  kSimulated,  // one annotated frame warped into a short clip
  kVideo,      // consecutive frames of the clip itself
};

// Desk-scale training recipe. It departs from the module defaults where the
// small model otherwise fails to train: wider slot initialization, Retriever
// logits scaled by 1/sqrt(32), matched slots carrying 0.95 of the class term
// and a higher learning rate.
inline ModelConfig toy_model_config() {
  ModelConfig m;
  m.slot_init_std = 1.0;
  m.retriever_logit_scale = 0.1767766952966369;  // 1/sqrt(channels = 32)
  return m;
}
inline LossOptions toy_loss_options() {
  LossOptions l;
  l.positive_weight = 0.95;
  return l;
}
inline OptimizerConfig toy_optimizer_config() {
  OptimizerConfig o;
  o.lr = 3e-4;
  return o;
}

struct TrainConfig {
  ModelConfig model = toy_model_config();
  LossOptions loss = toy_loss_options();
  OptimizerConfig optim = toy_optimizer_config();
  InferenceConfig inference;
  SimulateConfig simulate;
  // Used when no dataset directory is given: clips are generated in memory
  // with seeds seed + i (training) and eval_seed + i (evaluation).
  GeneratorConfig data;
  std::size_t train_clips = 48;
  std::size_t eval_clips = 16;
  std::uint64_t eval_seed = 1000000;
  std::string dataset;
  std::string eval_dataset;

  DataMode data_mode = DataMode::kSimulated;
  std::size_t frames = 2;  // T per training sample
  std::size_t epochs = 40;
  std::size_t max_iterations = 0;  // 0: no cap
  std::size_t eval_every = 0;      // epochs; 0: evaluate at the end only
  std::size_t checkpoint_every = 1;
  std::vector<std::size_t> windows = default_vpq_windows();
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  std::size_t iterations = 0;
  double final_loss = 0.0;
  std::optional<VpqReport> eval;
  std::optional<QualitySummary> eval_pq;
  std::filesystem::path checkpoint;
};

// Builds the training sample (images + annotations) for iteration `index`
// of `epoch`; deterministic in (cfg.seed, epoch, index).
Clip make_sample(const TrainConfig& cfg, const Clip& clip, std::size_t epoch,
                 std::size_t index);

// In-memory clip set generated from cfg.data.
std::vector<Clip> generate_clips(const GeneratorConfig& cfg, std::size_t count,
                                 std::uint64_t base_seed);

// Trains from scratch, or from `resume` (a checkpoint written by a previous
// call with the same configuration). Writes checkpoint.bin, train_log.jsonl
// and config.json into out_dir. Evaluation uses `eval` clips when non-empty.
template <typename S>
TrainResult train_loop(const TrainConfig& cfg, const std::vector<Clip>& train,
                       const std::vector<Clip>& eval, const std::filesystem::path& out_dir,
                       const std::optional<std::filesystem::path>& resume = std::nullopt);

// Creates a model from cfg.model and loads parameters from a checkpoint.
template <typename S>
void load_model(PanopticSlotModel<S>& model, const std::filesystem::path& checkpoint);

}  // namespace panoslot

#endif  // PANOSLOT_TRAINER_HPP_
