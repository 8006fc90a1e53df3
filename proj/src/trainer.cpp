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

#include "panoslot/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "panoslot/checkpoint.hpp"
#include "panoslot/errors.hpp"
#include "panoslot/json_io.hpp"

namespace panoslot {
namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9E3779B97F4A7C15ull + b + 0x2545F4914F6CDD1Dull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix(mix(seed, 0x0D0E), epoch));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

double record_scalar(const std::vector<CheckpointRecord>& records, const std::string& name) {
  for (const auto& r : records) {
    if (r.name == name) return r.to_tensor<double>()[0];
  }
  throw ConfigError("checkpoint lacks record " + name);
}

struct LossTotals {
  double total = 0, pq = 0, inst_disc = 0, mask_id_ce = 0, semseg = 0, id = 0;
  std::size_t count = 0;

  template <typename S>
  void add(const LossBreakdown<S>& l, double t) {
    total += t;
    pq += l.pq;
    inst_disc += l.inst_disc;
    mask_id_ce += l.mask_id_ce;
    semseg += l.semseg;
    id += l.id;
    ++count;
  }
  Json mean() const {
    const double n = count ? static_cast<double>(count) : 1.0;
    return {{"total", total / n}, {"pq", pq / n}, {"inst_disc", inst_disc / n},
            {"mask_id_ce", mask_id_ce / n}, {"semseg", semseg / n}, {"id", id / n}};
  }
};

void append_line(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::app);
  out << j.dump() << "\n";
  if (!out) throw IoError("cannot append to " + path.string());
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  loss.weights.validate();
  optim.validate();
  inference.validate();
  simulate.validate();
  data.validate();
  if (data.num_thing_classes != model.num_thing_classes ||
      data.num_stuff_classes != model.num_stuff_classes) {
    throw ConfigError("data and model disagree on the class layout");
  }
  if (frames == 0) throw ConfigError("train.frames must be >= 1");
  if (epochs == 0) throw ConfigError("train.epochs must be >= 1");
  if (checkpoint_every == 0) throw ConfigError("train.checkpoint_every must be >= 1");
  if (windows.empty()) throw ConfigError("eval windows must not be empty");
  if (!(loss.disc_temperature > 0) || !(loss.id_temperature > 0)) {
    throw ConfigError("loss temperatures must be > 0");
  }
  if (!(loss.positive_weight <= 1)) {
    throw ConfigError("loss.positive_weight must be <= 1 (negative: plain mean)");
  }
}

std::vector<Clip> generate_clips(const GeneratorConfig& cfg, std::size_t count,
                                 std::uint64_t base_seed) {
  std::vector<Clip> clips;
  for (std::size_t i = 0; i < count; ++i) {
    clips.push_back(generate_clip(sample_scene(cfg, base_seed + i), cfg.num_thing_classes,
                                  cfg.num_stuff_classes));
  }
  return clips;
}

Clip make_sample(const TrainConfig& cfg, const Clip& clip, std::size_t epoch,
                 std::size_t index) {
  if (clip.size() == 0) throw ConfigError("training clip has no frames");
  std::mt19937_64 rng(mix(mix(cfg.seed, epoch + 1), index));
  if (cfg.data_mode == DataMode::kVideo) {
    if (clip.size() < cfg.frames) {
      throw ConfigError("clip shorter than train.frames = " + std::to_string(cfg.frames));
    }
    const std::size_t start =
        std::uniform_int_distribution<std::size_t>(0, clip.size() - cfg.frames)(rng);
    Clip s;
    s.spec = clip.spec;
    for (std::size_t t = start; t < start + cfg.frames; ++t) {
      s.frames.push_back(clip.frames[t]);
      s.annotations.push_back(clip.annotations[t]);
    }
    return s;
  }
  const std::size_t f = std::uniform_int_distribution<std::size_t>(0, clip.size() - 1)(rng);
  SimulateConfig sim = cfg.simulate;
  sim.frames = cfg.frames;
  return simulate_clip_from_image(clip.frames[f], clip.annotations[f], sim, rng());
}

template <typename S>
void load_model(PanopticSlotModel<S>& model, const std::filesystem::path& checkpoint) {
  load_parameters(model.parameters(), read_checkpoint(checkpoint));
}

template <typename S>
TrainResult train_loop(const TrainConfig& cfg, const std::vector<Clip>& train,
                       const std::vector<Clip>& eval, const std::filesystem::path& out_dir,
                       const std::optional<std::filesystem::path>& resume) {
  cfg.validate();
  if (train.empty()) throw ConfigError("training set is empty");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  write_json(out_dir / "config.json", Json(cfg));

  PanopticSlotModel<S> model(cfg.model);
  AdamW<S> optim(model.parameters(), cfg.optim);
  std::size_t epoch = 0, next_index = 0, iterations = 0;
  const auto log_path = out_dir / "train_log.jsonl";
  if (resume) {
    const auto records = read_checkpoint(*resume);
    load_parameters(model.parameters(), records);
    optim.load_state(records);
    epoch = static_cast<std::size_t>(record_scalar(records, "train.epoch"));
    next_index = static_cast<std::size_t>(record_scalar(records, "train.next_index"));
    iterations = static_cast<std::size_t>(record_scalar(records, "train.iterations"));
  } else {
    std::ofstream(log_path, std::ios::trunc);
  }

  TrainResult result;
  result.checkpoint = out_dir / "checkpoint.bin";
  // Stores the position training resumes from.
  auto save = [&](std::size_t at_epoch, std::size_t at_index) {
    auto records = parameter_records(model.parameters());
    for (auto& r : optim.state_records()) records.push_back(std::move(r));
    records.push_back(CheckpointRecord::from_tensor(
        "train.epoch", Tensor<double>::scalar(static_cast<double>(at_epoch))));
    records.push_back(CheckpointRecord::from_tensor(
        "train.next_index", Tensor<double>::scalar(static_cast<double>(at_index))));
    records.push_back(CheckpointRecord::from_tensor(
        "train.iterations", Tensor<double>::scalar(static_cast<double>(iterations))));
    write_checkpoint(result.checkpoint, records);
  };
  auto evaluate = [&](LossTotals& totals) {
    const std::vector<Clip>& set = eval.empty() ? train : eval;
    std::vector<Video> gt;
    for (const auto& c : set) gt.push_back(c.annotations);
    const auto pred = predict_dataset(model, set, cfg.inference);
    VpqReport report = compute_vpq(pred, gt, cfg.windows);
    std::vector<PanopticFrame> pf, gf;
    for (std::size_t v = 0; v < gt.size(); ++v) {
      pf.insert(pf.end(), pred[v].begin(), pred[v].end());
      gf.insert(gf.end(), gt[v].begin(), gt[v].end());
    }
    const QualitySummary pq = compute_pq(pf, gf);
    append_line(log_path, {{"type", "eval"},
                           {"epoch", epoch},
                           {"iteration", iterations},
                           {"losses", totals.mean()},
                           {"pq", pq.all},
                           {"pq_thing", pq.thing},
                           {"pq_stuff", pq.stuff},
                           {"vpq", report}});
    totals = LossTotals{};
    result.eval = std::move(report);
    result.eval_pq = pq;
  };

  LossTotals totals;
  bool capped = false;
  Tape<S> tape;
  const std::size_t n = train.size();
  for (; epoch < cfg.epochs && !capped; ++epoch, next_index = 0) {
    optim.set_epoch(epoch);
    const auto order = epoch_order(cfg.seed, epoch, n);
    for (; next_index < n; ++next_index) {
      if (cfg.max_iterations && iterations >= cfg.max_iterations) {
        capped = true;
        break;
      }
      const Clip sample = make_sample(cfg, train[order[next_index]], epoch, next_index);
      double loss_value = 0.0;
      double grad_norm = 0.0;
      LossBreakdown<S> parts;
      try {
        std::vector<Tensor<S>> input;
        for (const auto& f : sample.frames) input.push_back(image_to_tensor<S>(f));
        ModelOutputs<S> out = model.forward(tape, input);
        parts = matched_loss(out.frames, sample.annotations, cfg.model.num_classes(), cfg.loss);
        loss_value = static_cast<double>(parts.total.value()[0]);
        tape.backward(parts.total);
        grad_norm = optim.step();
      } catch (const NumericError& e) {
        tape.clear();
        const auto dump = out_dir / "nonfinite_batch";
        write_clip(dump, sample);
        write_json(dump / "diagnostic.json",
                   {{"error", e.what()}, {"epoch", epoch}, {"index", next_index},
                    {"clip", order[next_index]}, {"iteration", iterations}});
        throw NumericError(std::string(e.what()) + " (batch dumped to " + dump.string() + ")");
      }
      ++iterations;
      totals.add(parts, loss_value);
      result.final_loss = loss_value;
      append_line(log_path, {{"type", "iter"},
                             {"epoch", epoch},
                             {"iteration", iterations},
                             {"lr", optim.learning_rate()},
                             {"loss", loss_value},
                             {"pq", parts.pq},
                             {"inst_disc", parts.inst_disc},
                             {"mask_id_ce", parts.mask_id_ce},
                             {"semseg", parts.semseg},
                             {"id", parts.id},
                             {"grad_norm", grad_norm}});
    }
    if (capped) break;
    const bool last = epoch + 1 == cfg.epochs;
    if (cfg.eval_every && (epoch + 1) % cfg.eval_every == 0 && !last) evaluate(totals);
    if ((epoch + 1) % cfg.checkpoint_every == 0 || last) save(epoch + 1, 0);
  }
  if (capped) save(epoch, next_index);
  if (!capped) evaluate(totals);
  result.iterations = iterations;
  return result;
}

#define PANOSLOT_INSTANTIATE(S)                                                         \
  template TrainResult train_loop<S>(const TrainConfig&, const std::vector<Clip>&,      \
                                     const std::vector<Clip>&, const std::filesystem::path&, \
                                     const std::optional<std::filesystem::path>&);      \
  template void load_model<S>(PanopticSlotModel<S>&, const std::filesystem::path&);
PANOSLOT_INSTANTIATE(float)
PANOSLOT_INSTANTIATE(double)
#undef PANOSLOT_INSTANTIATE

}  // namespace panoslot
