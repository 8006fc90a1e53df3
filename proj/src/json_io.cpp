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

#include "panoslot/json_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "panoslot/errors.hpp"

namespace panoslot {
namespace {

// Reads known keys into fields and rejects anything else.
class Fields {
 public:
  explicit Fields(const Json& j, const char* context) : j_(j), context_(context) {
    if (!j.is_object()) throw ConfigError(std::string(context) + ": expected an object");
  }

  template <typename T>
  Fields& operator()(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return *this;
    try {
      out = it->template get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(context_ + "." + key + ": " + e.what());
    }
    return *this;
  }

  void done() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config key " + context_ + "." + it.key());
    }
  }

 private:
  const Json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

template <typename E>
struct EnumNames;

template <>
struct EnumNames<SoftmaxDim> {
  static constexpr std::pair<SoftmaxDim, const char*> items[] = {
      {SoftmaxDim::kSlot, "slot"}, {SoftmaxDim::kSpatial, "spatial"}};
};
template <>
struct EnumNames<TrackMatching> {
  static constexpr std::pair<TrackMatching, const char*> items[] = {
      {TrackMatching::kGreedy, "greedy"}, {TrackMatching::kHungarian, "hungarian"}};
};
template <>
struct EnumNames<DataMode> {
  static constexpr std::pair<DataMode, const char*> items[] = {
      {DataMode::kSimulated, "simulated"}, {DataMode::kVideo, "video"}};
};
template <>
struct EnumNames<ShapeType> {
  static constexpr std::pair<ShapeType, const char*> items[] = {
      {ShapeType::kDisc, "disc"}, {ShapeType::kRect, "rect"}, {ShapeType::kTriangle, "triangle"}};
};

template <typename E>
std::string enum_name(E v) {
  for (const auto& [e, n] : EnumNames<E>::items) {
    if (e == v) return n;
  }
  throw ConfigError("unnamed enum value");
}

template <typename E>
E enum_value(const Json& j) {
  const std::string s = j.get<std::string>();
  std::string options;
  for (const auto& [e, n] : EnumNames<E>::items) {
    if (s == n) return e;
    options += options.empty() ? n : std::string("|") + n;
  }
  throw ConfigError("invalid value '" + s + "', expected " + options);
}

Json parse_value(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::exception&) {
    return Json(text);
  }
}

}  // namespace

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("cannot write " + path.string());
}

Json class_table(std::size_t num_thing_classes, std::size_t num_stuff_classes) {
  static const char* thing_names[] = {"disc", "rect", "triangle"};
  static const char* stuff_names[] = {"sky", "ground", "wall"};
  Json t = Json::array();
  for (std::size_t c = 0; c < num_thing_classes; ++c) {
    t.push_back({{"id", c},
                 {"name", std::string(thing_names[c % 3]) + (c >= 3 ? std::to_string(c / 3) : "")},
                 {"is_thing", true}});
  }
  for (std::size_t s = 0; s < num_stuff_classes; ++s) {
    t.push_back({{"id", num_thing_classes + s},
                 {"name", std::string(stuff_names[s % 3]) + (s >= 3 ? std::to_string(s / 3) : "")},
                 {"is_thing", false}});
  }
  return t;
}

void to_json(Json& j, const SegmentInfo& v) {
  j = {{"id", v.id}, {"class_id", v.class_id}, {"is_thing", v.is_thing},
       {"track_id", v.track_id}, {"confidence", v.confidence}};
}
void from_json(const Json& j, SegmentInfo& v) {
  Fields(j, "segment")("id", v.id)("class_id", v.class_id)("is_thing", v.is_thing)(
      "track_id", v.track_id)("confidence", v.confidence)
      .done();
}

void to_json(Json& j, const ThingSpec& v) {
  j = {{"shape", enum_name(v.shape)}, {"class_id", v.class_id}, {"cx", v.cx}, {"cy", v.cy},
       {"size", v.size}, {"aspect", v.aspect}, {"vx", v.vx}, {"vy", v.vy}, {"color", v.color}};
}
void from_json(const Json& j, ThingSpec& v) {
  std::string shape = enum_name(v.shape);
  Fields(j, "thing")("shape", shape)("class_id", v.class_id)("cx", v.cx)("cy", v.cy)(
      "size", v.size)("aspect", v.aspect)("vx", v.vx)("vy", v.vy)("color", v.color)
      .done();
  v.shape = shape_from_name(shape);
}

void to_json(Json& j, const StuffBand& v) {
  j = {{"class_id", v.class_id}, {"top", v.top}, {"bottom", v.bottom}, {"color", v.color}};
}
void from_json(const Json& j, StuffBand& v) {
  Fields(j, "band")("class_id", v.class_id)("top", v.top)("bottom", v.bottom)("color", v.color)
      .done();
}

void to_json(Json& j, const SceneSpec& v) {
  j = {{"height", v.height}, {"width", v.width}, {"frames", v.frames}, {"bands", v.bands},
       {"things", v.things}, {"noise", v.noise}, {"seed", v.seed}};
}
void from_json(const Json& j, SceneSpec& v) {
  Fields(j, "spec")("height", v.height)("width", v.width)("frames", v.frames)("bands", v.bands)(
      "things", v.things)("noise", v.noise)("seed", v.seed)
      .done();
}

void to_json(Json& j, const GeneratorConfig& v) {
  j = {{"height", v.height},
       {"width", v.width},
       {"frames", v.frames},
       {"min_things", v.min_things},
       {"max_things", v.max_things},
       {"num_thing_classes", v.num_thing_classes},
       {"num_stuff_classes", v.num_stuff_classes},
       {"stuff_bands", v.stuff_bands},
       {"min_size", v.min_size},
       {"max_size", v.max_size},
       {"max_speed", v.max_speed},
       {"max_occlusion", v.max_occlusion},
       {"noise", v.noise}};
}
void from_json(const Json& j, GeneratorConfig& v) {
  Fields(j, "data")("height", v.height)("width", v.width)("frames", v.frames)(
      "min_things", v.min_things)("max_things", v.max_things)(
      "num_thing_classes", v.num_thing_classes)("num_stuff_classes", v.num_stuff_classes)(
      "stuff_bands", v.stuff_bands)("min_size", v.min_size)("max_size", v.max_size)(
      "max_speed", v.max_speed)("max_occlusion", v.max_occlusion)("noise", v.noise)
      .done();
}

void to_json(Json& j, const SimulateConfig& v) {
  j = {{"scale_min", v.scale_min}, {"scale_max", v.scale_max}, {"translate", v.translate}};
}
void from_json(const Json& j, SimulateConfig& v) {
  Fields(j, "simulate")("scale_min", v.scale_min)("scale_max", v.scale_max)(
      "translate", v.translate)
      .done();
}

void to_json(Json& j, const ModelConfig& v) {
  j = {{"channels", v.channels},
       {"backbone_width", v.backbone_width},
       {"num_slots", v.num_slots},
       {"schedule", v.schedule},
       {"ffn_hidden", v.ffn_hidden},
       {"video_retriever", v.video_retriever},
       {"softmax_dim", enum_name(v.softmax_dim)},
       {"retriever_output_projection", v.retriever_output_projection},
       {"retriever_logit_scale", v.retriever_logit_scale},
       {"num_thing_classes", v.num_thing_classes},
       {"num_stuff_classes", v.num_stuff_classes},
       {"slot_init_std", v.slot_init_std},
       {"seed", v.seed}};
}
void from_json(const Json& j, ModelConfig& v) {
  std::string dim = enum_name(v.softmax_dim);
  Fields(j, "model")("channels", v.channels)("backbone_width", v.backbone_width)(
      "num_slots", v.num_slots)("schedule", v.schedule)("ffn_hidden", v.ffn_hidden)(
      "video_retriever", v.video_retriever)("softmax_dim", dim)(
      "retriever_output_projection", v.retriever_output_projection)(
      "retriever_logit_scale", v.retriever_logit_scale)("num_thing_classes", v.num_thing_classes)(
      "num_stuff_classes", v.num_stuff_classes)("slot_init_std", v.slot_init_std)("seed", v.seed)
      .done();
  v.softmax_dim = enum_value<SoftmaxDim>(Json(dim));
}

void to_json(Json& j, const LossWeights& v) {
  j = {{"pq", v.pq}, {"inst_disc", v.inst_disc}, {"mask_id_ce", v.mask_id_ce},
       {"semseg", v.semseg}, {"id", v.id}};
}
void from_json(const Json& j, LossWeights& v) {
  Fields(j, "loss.weights")("pq", v.pq)("inst_disc", v.inst_disc)("mask_id_ce", v.mask_id_ce)(
      "semseg", v.semseg)("id", v.id)
      .done();
}

void to_json(Json& j, const LossOptions& v) {
  j = {{"weights", v.weights},
       {"disc_temperature", v.disc_temperature},
       {"id_temperature", v.id_temperature},
       {"positive_weight", v.positive_weight},
       {"allow_partial_match", v.allow_partial_match}};
}
void from_json(const Json& j, LossOptions& v) {
  Fields(j, "loss")("weights", v.weights)("disc_temperature", v.disc_temperature)(
      "id_temperature", v.id_temperature)("positive_weight", v.positive_weight)(
      "allow_partial_match", v.allow_partial_match)
      .done();
}

void to_json(Json& j, const OptimizerConfig& v) {
  j = {{"lr", v.lr}, {"weight_decay", v.weight_decay}, {"beta1", v.beta1}, {"beta2", v.beta2},
       {"eps", v.eps}, {"grad_clip", v.grad_clip}, {"milestones", v.milestones},
       {"gamma", v.gamma}, {"warmup_steps", v.warmup_steps}};
}
void from_json(const Json& j, OptimizerConfig& v) {
  Fields(j, "optim")("lr", v.lr)("weight_decay", v.weight_decay)("beta1", v.beta1)(
      "beta2", v.beta2)("eps", v.eps)("grad_clip", v.grad_clip)("milestones", v.milestones)(
      "gamma", v.gamma)("warmup_steps", v.warmup_steps)
      .done();
}

void to_json(Json& j, const FilterConfig& v) {
  j = {{"class_conf", v.class_conf}, {"pixel_conf", v.pixel_conf},
       {"overlap_ratio", v.overlap_ratio}, {"stuff_min_area", v.stuff_min_area},
       {"reference_area", v.reference_area}};
}
void from_json(const Json& j, FilterConfig& v) {
  Fields(j, "inference.filter")("class_conf", v.class_conf)("pixel_conf", v.pixel_conf)(
      "overlap_ratio", v.overlap_ratio)("stuff_min_area", v.stuff_min_area)(
      "reference_area", v.reference_area)
      .done();
}

void to_json(Json& j, const InferenceConfig& v) {
  j = {{"filter", v.filter}, {"tau_id", v.tau_id}, {"matching", enum_name(v.matching)}};
}
void from_json(const Json& j, InferenceConfig& v) {
  std::string matching = enum_name(v.matching);
  Fields(j, "inference")("filter", v.filter)("tau_id", v.tau_id)("matching", matching).done();
  v.matching = enum_value<TrackMatching>(Json(matching));
}

void to_json(Json& j, const TrainConfig& v) {
  j = {{"model", v.model},
       {"loss", v.loss},
       {"optim", v.optim},
       {"inference", v.inference},
       {"simulate", v.simulate},
       {"data", v.data},
       {"train_clips", v.train_clips},
       {"eval_clips", v.eval_clips},
       {"eval_seed", v.eval_seed},
       {"dataset", v.dataset},
       {"eval_dataset", v.eval_dataset},
       {"data_mode", enum_name(v.data_mode)},
       {"frames", v.frames},
       {"epochs", v.epochs},
       {"max_iterations", v.max_iterations},
       {"eval_every", v.eval_every},
       {"checkpoint_every", v.checkpoint_every},
       {"windows", v.windows},
       {"seed", v.seed}};
}
void from_json(const Json& j, TrainConfig& v) {
  std::string mode = enum_name(v.data_mode);
  Fields(j, "config")("model", v.model)("loss", v.loss)("optim", v.optim)(
      "inference", v.inference)("simulate", v.simulate)("data", v.data)(
      "train_clips", v.train_clips)("eval_clips", v.eval_clips)("eval_seed", v.eval_seed)(
      "dataset", v.dataset)("eval_dataset", v.eval_dataset)("data_mode", mode)(
      "frames", v.frames)("epochs", v.epochs)("max_iterations", v.max_iterations)(
      "eval_every", v.eval_every)("checkpoint_every", v.checkpoint_every)(
      "windows", v.windows)("seed", v.seed)
      .done();
  v.data_mode = enum_value<DataMode>(Json(mode));
}

void to_json(Json& j, const QualitySummary& v) {
  Json classes = Json::object();
  for (const auto& [c, s] : v.per_class) {
    classes[std::to_string(c)] = {{"is_thing", s.is_thing}, {"iou_sum", s.iou_sum},
                                  {"tp", s.tp}, {"fp", s.fp}, {"fn", s.fn},
                                  {"quality", s.quality()}};
  }
  j = {{"all", v.all},     {"thing", v.thing},       {"stuff", v.stuff},
       {"vacuous", v.vacuous}, {"classes", classes}};
}

void to_json(Json& j, const VpqReport& v) {
  Json windows = Json::array();
  for (const auto& w : v.windows) windows.push_back({{"k", w.k}, {"quality", w.quality}});
  j = {{"vpq", v.vpq}, {"vpq_thing", v.vpq_thing}, {"vpq_stuff", v.vpq_stuff},
       {"vacuous", v.vacuous}, {"windows", windows}};
}

void apply_override(Json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string path = assignment.substr(0, eq);
  Json* node = &config;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!node->is_object() || !node->contains(part)) {
      throw ConfigError("override: unknown config key " + path);
    }
    node = &(*node)[part];
  }
  Json value = parse_value(assignment.substr(eq + 1));
  // Keep strings as strings even when they look numeric.
  if (node->is_string() && !value.is_string()) value = assignment.substr(eq + 1);
  *node = std::move(value);
}

TrainConfig load_train_config(const std::optional<std::filesystem::path>& file,
                              const std::vector<std::string>& overrides) {
  Json j = TrainConfig{};
  if (file) j.merge_patch(read_json(*file));
  for (const auto& o : overrides) apply_override(j, o);
  TrainConfig cfg = j.get<TrainConfig>();
  cfg.validate();
  return cfg;
}

}  // namespace panoslot
