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

#include "panoslot/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "panoslot/ablation.hpp"
#include "panoslot/errors.hpp"
#include "panoslot/json_io.hpp"
#include "panoslot/trainer.hpp"

namespace panoslot {
namespace {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::size_t jobs = 1;
  std::string windows;
  std::string dtype = "f32";
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config, "JSON config file");
  app->add_option("--override", o.overrides, "dotted key=value, repeatable")->take_all();
  app->add_option("--seed", o.seed, "seed for data, model and training");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--jobs", o.jobs, "parallel workers (1 = fully serial)")->check(CLI::PositiveNumber);
  app->add_option("--windows", o.windows, "comma-separated VPQ window keys k, e.g. 0,5,10,15");
  app->add_option("--dtype", o.dtype, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
}

std::vector<std::size_t> parse_list(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stoul(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(std::string("invalid ") + what + " list '" + text + "'");
    }
  }
  if (out.empty()) throw ConfigError(std::string("empty ") + what + " list");
  return out;
}

// Effective configuration: defaults, file, --seed, --windows, overrides.
Json effective_json(const CommonOptions& o, const std::optional<fs::path>& fallback = {}) {
  Json j = TrainConfig{};
  if (!o.config.empty()) {
    j.merge_patch(read_json(o.config));
  } else if (fallback && fs::exists(*fallback)) {
    j.merge_patch(read_json(*fallback));
  }
  if (o.seed) {
    apply_override(j, "seed=" + std::to_string(*o.seed));
    apply_override(j, "model.seed=" + std::to_string(*o.seed));
  }
  if (!o.windows.empty()) j["windows"] = parse_list(o.windows, "window");
  for (const auto& ov : o.overrides) apply_override(j, ov);
  j.get<TrainConfig>().validate();
  return j;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

struct NamedClips {
  std::vector<std::string> names;
  std::vector<Clip> clips;
};

NamedClips clips_from(const std::string& dir, const GeneratorConfig& data, std::size_t count,
                      std::uint64_t seed) {
  NamedClips out;
  if (!dir.empty()) {
    if (!fs::exists(fs::path(dir) / "manifest.json")) {
      throw IoError("dataset not found: " + dir + " (no manifest.json)");
    }
    for (const auto& e : read_manifest(dir)) {
      out.names.push_back(e.name);
      out.clips.push_back(read_clip(fs::path(dir) / e.name));
    }
    return out;
  }
  out.clips = generate_clips(data, count, seed);
  for (std::size_t i = 0; i < out.clips.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "clip_%04zu", i);
    out.names.emplace_back(name);
  }
  return out;
}

void write_report(const fs::path& out, const VpqReport& report, const QualitySummary& pq) {
  write_json(out / "vpq.json", Json{{"vpq", report}, {"pq", pq}});
  write_text(out / "vpq.txt", format_vpq_table(report));
}

QualitySummary frame_pq(const std::vector<Video>& pred, const std::vector<Video>& gt) {
  std::vector<PanopticFrame> pf, gf;
  for (std::size_t v = 0; v < gt.size(); ++v) {
    pf.insert(pf.end(), pred[v].begin(), pred[v].end());
    gf.insert(gf.end(), gt[v].begin(), gt[v].end());
  }
  return compute_pq(pf, gf);
}

int cmd_datagen(const CommonOptions& o, std::size_t clips, std::optional<std::size_t> things) {
  Json j = effective_json(o);
  if (things) {
    j["data"]["max_things"] = *things;
    j["data"]["min_things"] = std::min(j["data"]["min_things"].get<std::size_t>(), *things);
  }
  const TrainConfig cfg = j.get<TrainConfig>();
  make_dir(o.out);
  write_json(fs::path(o.out) / "config.json", j);
  const auto entries = generate_dataset(o.out, cfg.data, clips, cfg.seed);
  std::cout << "wrote " << entries.size() << " clips to " << o.out << "\n";
  return kExitOk;
}

template <typename S>
int cmd_train(const CommonOptions& o, const std::string& resume) {
  const Json j = effective_json(o);
  const TrainConfig cfg = j.get<TrainConfig>();
  const NamedClips train = clips_from(cfg.dataset, cfg.data, cfg.train_clips, cfg.seed);
  const NamedClips eval = clips_from(cfg.eval_dataset, cfg.data, cfg.eval_clips, cfg.eval_seed);
  std::optional<fs::path> from;
  if (!resume.empty()) {
    if (!fs::exists(resume)) throw IoError("checkpoint not found: " + resume);
    from = resume;
  }
  const TrainResult r = train_loop<S>(cfg, train.clips, eval.clips, o.out, from);
  std::cout << "iterations " << r.iterations << ", final loss " << r.final_loss << "\n";
  if (r.eval) {
    write_report(o.out, *r.eval, *r.eval_pq);
    std::cout << format_vpq_table(*r.eval);
  }
  return kExitOk;
}

template <typename S>
int cmd_eval(const CommonOptions& o, const std::string& checkpoint, const std::string& dataset,
             bool gt_as_prediction) {
  const fs::path ckpt(checkpoint);
  const Json j = effective_json(o, ckpt.parent_path() / "config.json");
  TrainConfig cfg = j.get<TrainConfig>();
  if (!dataset.empty()) cfg.eval_dataset = dataset;
  const NamedClips clips = clips_from(cfg.eval_dataset, cfg.data, cfg.eval_clips, cfg.eval_seed);
  std::vector<Video> gt, pred;
  for (const auto& c : clips.clips) gt.push_back(c.annotations);
  if (gt_as_prediction) {
    pred = gt;
  } else {
    if (!fs::exists(ckpt)) throw IoError("checkpoint not found: " + checkpoint);
    PanopticSlotModel<S> model(cfg.model);
    load_model(model, ckpt);
    pred = predict_dataset(model, clips.clips, cfg.inference);
  }
  make_dir(o.out);
  write_json(fs::path(o.out) / "config.json", Json(cfg));
  for (std::size_t v = 0; v < pred.size(); ++v) {
    write_predictions(fs::path(o.out) / "predictions" / clips.names[v], pred[v]);
  }
  const VpqReport report = compute_vpq(pred, gt, cfg.windows);
  write_report(o.out, report, frame_pq(pred, gt));
  std::cout << format_vpq_table(report);
  return kExitOk;
}

int cmd_ablate(const CommonOptions& o, const std::vector<std::string>& grids,
               std::size_t num_seeds, const std::string& slot_values) {
  if (grids.empty()) throw ConfigError("ablate: empty grid (pass --grid)");
  if (o.dtype != "f32") throw ConfigError("ablate runs in f32 only");
  const Json j = effective_json(o);
  const TrainConfig base = j.get<TrainConfig>();
  std::vector<AblationVariant> variants;
  for (const auto& g : grids) {
    for (auto& v : ablation_grid(g, parse_list(slot_values, "slot"))) variants.push_back(v);
  }
  std::vector<std::uint64_t> seeds;
  for (std::size_t s = 0; s < num_seeds; ++s) seeds.push_back(base.seed + s);
  make_dir(o.out);
  write_json(fs::path(o.out) / "config.json", j);
  const auto rows = run_ablation(j, variants, seeds, o.out, o.jobs);
  write_json(fs::path(o.out) / "ablation.json", Json(rows));
  const std::string table = format_ablation_table(rows);
  write_text(fs::path(o.out) / "ablation.txt", table);
  std::cout << table;
  return kExitOk;
}

template <typename S>
int cmd_dump_attention(const CommonOptions& o, const std::string& checkpoint,
                       const std::string& clip_dir, std::size_t frames) {
  const fs::path ckpt(checkpoint);
  const Json j = effective_json(o, ckpt.parent_path() / "config.json");
  const TrainConfig cfg = j.get<TrainConfig>();
  if (!fs::exists(fs::path(clip_dir) / "clip.json")) throw IoError("clip not found: " + clip_dir);
  if (!fs::exists(ckpt)) throw IoError("checkpoint not found: " + checkpoint);
  const Clip clip = read_clip(clip_dir);
  if (frames == 0 || frames > clip.size()) {
    throw ConfigError("dump-attention: --frames must lie in [1, " + std::to_string(clip.size()) + "]");
  }
  PanopticSlotModel<S> model(cfg.model);
  load_model(model, ckpt);
  Tape<S> tape;
  tape.set_grad_enabled(false);
  std::vector<Tensor<S>> input;
  for (std::size_t t = 0; t < frames; ++t) input.push_back(image_to_tensor<S>(clip.frames[t]));
  std::vector<AttentionRecord<S>> records;
  model.forward(tape, input, &records);
  const std::size_t planes = write_attention(o.out, records);
  const auto entropy = attention_entropy_by_stage(records);
  write_json(fs::path(o.out) / "entropy.json", Json{{"stage_entropy", entropy}});
  std::cout << "wrote " << planes << " attention planes to " << o.out << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"panoslot: video panoptic segmentation with panoptic slots"};
  app.require_subcommand(1);
  CommonOptions o;

  auto* datagen = app.add_subcommand("datagen", "generate a synthetic clip dataset");
  add_common(datagen, o);
  std::size_t clips = 8;
  std::optional<std::size_t> things;
  datagen->add_option("--clips", clips, "number of clips");
  datagen->add_option("--things", things, "maximum things per scene (0: stuff only)");

  auto* train = app.add_subcommand("train", "train a model");
  add_common(train, o);
  std::string resume, dataset;
  train->add_option("--resume", resume, "checkpoint to resume from");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval, o);
  std::string checkpoint;
  bool gt_as_prediction = false;
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--dataset", dataset, "dataset directory (default: generated eval set)");
  eval->add_flag("--gt-as-prediction", gt_as_prediction, "debug: score the ground truth itself");

  auto* ablate = app.add_subcommand("ablate", "train and evaluate a grid of variants");
  add_common(ablate, o);
  std::vector<std::string> grids;
  std::size_t num_seeds = 3;
  std::string slot_values = "4,8,16,32";
  ablate->add_option("--grid", grids, "softmax_dim|video_retriever|slots|schedule, repeatable")
      ->take_all();
  ablate->add_option("--seeds", num_seeds, "seeds per variant")->check(CLI::PositiveNumber);
  ablate->add_option("--slot-values", slot_values, "slot counts for the slots grid");

  auto* dump = app.add_subcommand("dump-attention", "export retriever attention planes");
  add_common(dump, o);
  std::string clip_dir;
  std::size_t frames = 2;
  dump->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  dump->add_option("--clip", clip_dir, "clip directory")->required();
  dump->add_option("--frames", frames, "leading frames fed jointly");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    app.parse(reversed);
    const bool f64 = o.dtype == "f64";
    if (*datagen) return cmd_datagen(o, clips, things);
    if (*train) return f64 ? cmd_train<double>(o, resume) : cmd_train<float>(o, resume);
    if (*eval) {
      return f64 ? cmd_eval<double>(o, checkpoint, dataset, gt_as_prediction)
                 : cmd_eval<float>(o, checkpoint, dataset, gt_as_prediction);
    }
    if (*ablate) return cmd_ablate(o, grids, num_seeds, slot_values);
    if (*dump) {
      return f64 ? cmd_dump_attention<double>(o, checkpoint, clip_dir, frames)
                 : cmd_dump_attention<float>(o, checkpoint, clip_dir, frames);
    }
    return kExitConfig;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ShapeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  }
}

int run_cli(int argc, char** argv) {
  return run_cli(std::vector<std::string>(argv, argv + argc));
}

}  // namespace panoslot
