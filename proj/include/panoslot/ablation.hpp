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

#ifndef PANOSLOT_ABLATION_HPP_
#define PANOSLOT_ABLATION_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "panoslot/json_io.hpp"

namespace panoslot {

// One configuration in a sweep, expressed as config overrides.
struct AblationVariant {
  std::string grid;
  std::string name;
  std::vector<std::string> overrides;
};

struct AblationRun {
  std::uint64_t seed = 0;
  double vpq = 0, pq = 0, seconds = 0;
};

struct AblationRow {
  AblationVariant variant;
  double vpq = 0, pq = 0, seconds = 0;  // means over runs
  std::vector<AblationRun> runs;
};

// Known grids: softmax_dim, video_retriever, slots, schedule.
std::vector<AblationVariant> ablation_grid(const std::string& grid,
                                           const std::vector<std::size_t>& slot_values = {4, 8, 16, 32});

// Trains and evaluates every variant for every seed (seed also seeds the
// model and the generated data). Runs are independent and spread over
// `jobs` threads; results do not depend on `jobs`.
std::vector<AblationRow> run_ablation(const Json& base_config,
                                      const std::vector<AblationVariant>& variants,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::filesystem::path& out_dir,
                                      std::size_t jobs = 1);

std::string format_ablation_table(const std::vector<AblationRow>& rows);
void to_json(Json& j, const AblationRow& row);

}  // namespace panoslot

#endif  // PANOSLOT_ABLATION_HPP_
