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

#include "panoslot/inference.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "panoslot/errors.hpp"
#include "panoslot/json_io.hpp"
#include "panoslot/losses.hpp"

namespace panoslot {
namespace {

std::string numbered(const char* fmt, std::size_t a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, a);
  return buf;
}

template <typename S>
Eigen::MatrixXd id_matrix(const FrameOutputs<S>& f) {
  return f.id_embed.value().matrix().template cast<double>();
}

}  // namespace

void InferenceConfig::validate() const {
  filter.validate();
  if (!(tau_id >= -1 && tau_id <= 1)) throw ConfigError("inference.tau_id must lie in [-1, 1]");
}

template <typename S>
Video predict_video(const PanopticSlotModel<S>& model, const std::vector<Image>& frames,
                    const InferenceConfig& cfg,
                    std::vector<AttentionRecord<S>>* attention) {
  cfg.validate();
  if (frames.empty()) throw ConfigError("predict_video: empty video");
  const ModelConfig& mc = model.config();
  Tape<S> tape;
  tape.set_grad_enabled(false);

  Video out;
  TrackAssignment tracks;
  Eigen::MatrixXd prev_id;
  auto emit = [&](const FrameOutputs<S>& f) {
    const Eigen::MatrixXd id = id_matrix(f);
    tracks = out.empty() ? initial_tracks(mc.num_slots)
                         : assign_tracks(id, prev_id, tracks, cfg.tau_id, cfg.matching);
    prev_id = id;
    out.push_back(postprocess(class_prediction(f), mask_prediction(f), mc.num_thing_classes,
                              cfg.filter, &tracks.ids));
  };
  auto run = [&](std::size_t first, std::size_t count) {
    std::vector<Tensor<S>> input;
    for (std::size_t i = 0; i < count; ++i) input.push_back(image_to_tensor<S>(frames[first + i]));
    std::vector<AttentionRecord<S>> maps;
    ModelOutputs<S> o = model.forward(tape, input, attention ? &maps : nullptr);
    if (attention) {
      for (auto& r : maps) {
        r.frame += first;
        attention->push_back(std::move(r));
      }
    }
    return o;
  };

  if (frames.size() == 1) {
    emit(run(0, 1).frames[0]);
    return out;
  }
  {
    ModelOutputs<S> o = run(0, 2);
    emit(o.frames[0]);
    emit(o.frames[1]);
    tape.clear();
  }
  for (std::size_t t = 2; t < frames.size(); ++t) {
    ModelOutputs<S> o = run(t - 1, 2);
    emit(o.frames[1]);
    tape.clear();
  }
  return out;
}

template <typename S>
std::vector<Video> predict_dataset(const PanopticSlotModel<S>& model,
                                   const std::vector<Clip>& clips,
                                   const InferenceConfig& cfg) {
  std::vector<Video> out;
  for (const auto& c : clips) out.push_back(predict_video(model, c.frames, cfg));
  return out;
}

template <typename S>
std::vector<double> attention_entropy_by_stage(const std::vector<AttentionRecord<S>>& records,
                                               std::size_t num_stages) {
  std::vector<double> total(num_stages, 0.0);
  std::vector<double> count(num_stages, 0.0);
  for (const auto& r : records) {
    if (r.stage >= num_stages) throw ShapeError("attention record stage out of range");
    const auto a = r.attention.matrix();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      double h = 0.0;
      for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const double p = static_cast<double>(a(i, j));
        if (p > 0) h -= p * std::log(p);
      }
      total[r.stage] += h;
      count[r.stage] += 1.0;
    }
  }
  for (std::size_t s = 0; s < num_stages; ++s) {
    if (count[s] > 0) total[s] /= count[s];
  }
  return total;
}

template <typename S>
std::size_t write_attention(const std::filesystem::path& dir,
                            const std::vector<AttentionRecord<S>>& records) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  Json planes = Json::array();
  std::size_t n = 0;
  for (const auto& r : records) {
    const auto a = r.attention.matrix();
    for (Eigen::Index slot = 0; slot < a.cols(); ++slot) {
      char name[96];
      std::snprintf(name, sizeof(name), "attn_f%02zu_s%zu_m%02zu_l%02ld.f32", r.frame, r.stage,
                    r.module, static_cast<long>(slot));
      std::vector<float> plane(static_cast<std::size_t>(a.rows()));
      for (Eigen::Index i = 0; i < a.rows(); ++i) plane[static_cast<std::size_t>(i)] = static_cast<float>(a(i, slot));
      std::ofstream out(dir / name, std::ios::binary);
      out.write(reinterpret_cast<const char*>(plane.data()),
                static_cast<std::streamsize>(plane.size() * sizeof(float)));
      if (!out) throw IoError("cannot write " + (dir / name).string());
      planes.push_back({{"file", name},     {"frame", r.frame},   {"stage", r.stage},
                        {"module", r.module}, {"slot", slot},       {"height", r.height},
                        {"width", r.width}});
      ++n;
    }
  }
  write_json(dir / "attention.json", Json{{"dtype", "float32"}, {"planes", planes}});
  return n;
}

void write_predictions(const std::filesystem::path& dir, const Video& video) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t t = 0; t < video.size(); ++t) {
    const auto& f = video[t];
    write_pgm16(dir / numbered("pred_%04zu.pgm", t), f.height, f.width, f.ids);
    write_json(dir / numbered("pred_%04zu.json", t), Json{{"segments", f.segments}});
  }
}

#define PANOSLOT_INSTANTIATE(S)                                                          \
  template Video predict_video<S>(const PanopticSlotModel<S>&, const std::vector<Image>&, \
                                  const InferenceConfig&, std::vector<AttentionRecord<S>>*); \
  template std::vector<Video> predict_dataset<S>(const PanopticSlotModel<S>&,            \
                                                 const std::vector<Clip>&,               \
                                                 const InferenceConfig&);                \
  template std::vector<double> attention_entropy_by_stage<S>(                            \
      const std::vector<AttentionRecord<S>>&, std::size_t);                              \
  template std::size_t write_attention<S>(const std::filesystem::path&,                  \
                                          const std::vector<AttentionRecord<S>>&);
PANOSLOT_INSTANTIATE(float)
PANOSLOT_INSTANTIATE(double)
#undef PANOSLOT_INSTANTIATE

}  // namespace panoslot
