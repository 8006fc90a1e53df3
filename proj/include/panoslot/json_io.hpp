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

#ifndef PANOSLOT_JSON_IO_HPP_
#define PANOSLOT_JSON_IO_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "panoslot/datagen.hpp"
#include "panoslot/metrics.hpp"
#include "panoslot/trainer.hpp"

namespace panoslot {

// Insertion-ordered so written files are stable and readable.
using Json = nlohmann::ordered_json;

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

// [{id, name, is_thing}] for the toy palette.
Json class_table(std::size_t num_thing_classes, std::size_t num_stuff_classes);

// Config readers reject unknown keys and fill missing ones with defaults.
void to_json(Json& j, const SegmentInfo& v);
void from_json(const Json& j, SegmentInfo& v);
void to_json(Json& j, const ThingSpec& v);
void from_json(const Json& j, ThingSpec& v);
void to_json(Json& j, const StuffBand& v);
void from_json(const Json& j, StuffBand& v);
void to_json(Json& j, const SceneSpec& v);
void from_json(const Json& j, SceneSpec& v);
void to_json(Json& j, const GeneratorConfig& v);
void from_json(const Json& j, GeneratorConfig& v);
void to_json(Json& j, const SimulateConfig& v);
void from_json(const Json& j, SimulateConfig& v);
void to_json(Json& j, const ModelConfig& v);
void from_json(const Json& j, ModelConfig& v);
void to_json(Json& j, const LossWeights& v);
void from_json(const Json& j, LossWeights& v);
void to_json(Json& j, const LossOptions& v);
void from_json(const Json& j, LossOptions& v);
void to_json(Json& j, const OptimizerConfig& v);
void from_json(const Json& j, OptimizerConfig& v);
void to_json(Json& j, const FilterConfig& v);
void from_json(const Json& j, FilterConfig& v);
void to_json(Json& j, const InferenceConfig& v);
void from_json(const Json& j, InferenceConfig& v);
void to_json(Json& j, const TrainConfig& v);
void from_json(const Json& j, TrainConfig& v);

void to_json(Json& j, const QualitySummary& v);
void to_json(Json& j, const VpqReport& v);

// Applies "a.b.c=value"; the value is parsed as JSON when possible and taken
// as a string otherwise. The key path must already exist.
void apply_override(Json& config, const std::string& assignment);

// Defaults, then the optional file, then overrides, parsed strictly.
TrainConfig load_train_config(const std::optional<std::filesystem::path>& file,
                              const std::vector<std::string>& overrides);

}  // namespace panoslot

#endif  // PANOSLOT_JSON_IO_HPP_
