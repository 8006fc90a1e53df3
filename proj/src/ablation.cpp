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

#include "panoslot/ablation.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "panoslot/errors.hpp"

namespace panoslot {

std::vector<AblationVariant> ablation_grid(const std::string& grid,
                                           const std::vector<std::size_t>& slot_values) {
  std::vector<AblationVariant> out;
  if (grid == "softmax_dim") {
    out.push_back({grid, "slot", {"model.softmax_dim=slot"}});
    out.push_back({grid, "spatial", {"model.softmax_dim=spatial"}});
  } else if (grid == "video_retriever") {
    out.push_back({grid, "on", {"model.video_retriever=true"}});
    out.push_back({grid, "off", {"model.video_retriever=false"}});
  } else if (grid == "slots") {
    if (slot_values.empty()) throw ConfigError("ablation: empty slot-count list");
    // Small slot counts cannot cover every segment of a crowded scene.
    for (std::size_t l : slot_values) {
      out.push_back({grid, "L=" + std::to_string(l),
                     {"model.num_slots=" + std::to_string(l), "loss.allow_partial_match=true"}});
    }
  } else if (grid == "schedule") {
    for (const char* s : {"[1,1,1,1]", "[1,2,2,2]", "[2,2,2,2]"}) {
      out.push_back({grid, s, {std::string("model.schedule=") + s}});
    }
  } else {
    throw ConfigError("ablation: unknown grid '" + grid +
                      "' (softmax_dim|video_retriever|slots|schedule)");
  }
  return out;
}

std::vector<AblationRow> run_ablation(const Json& base_config,
                                      const std::vector<AblationVariant>& variants,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::filesystem::path& out_dir,
                                      std::size_t jobs) {
  if (variants.empty() || seeds.empty()) throw ConfigError("ablation: empty grid");
  std::vector<AblationRow> rows(variants.size());
  std::vector<TrainConfig> configs;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    rows[v].variant = variants[v];
    rows[v].runs.resize(seeds.size());
    for (std::uint64_t seed : seeds) {
      Json j = base_config;
      apply_override(j, "seed=" + std::to_string(seed));
      apply_override(j, "model.seed=" + std::to_string(seed));
      for (const auto& o : variants[v].overrides) apply_override(j, o);
      TrainConfig cfg = j.get<TrainConfig>();
      cfg.validate();
      configs.push_back(std::move(cfg));
    }
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      const std::size_t v = i / seeds.size(), s = i % seeds.size();
      try {
        const TrainConfig& cfg = configs[i];
        const auto start = std::chrono::steady_clock::now();
        const auto train = generate_clips(cfg.data, cfg.train_clips, cfg.seed);
        const auto eval = generate_clips(cfg.data, cfg.eval_clips, cfg.eval_seed);
        std::string dir = variants[v].grid + "_" + std::to_string(v);
        const TrainResult r = train_loop<float>(
            cfg, train, eval, out_dir / dir / ("seed" + std::to_string(seeds[s])));
        AblationRun& run = rows[v].runs[s];
        run.seed = seeds[s];
        run.vpq = r.eval ? r.eval->vpq : 0.0;
        run.pq = r.eval_pq ? r.eval_pq->all : 0.0;
        run.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(jobs, configs.size()));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);

  for (auto& row : rows) {
    for (const auto& r : row.runs) {
      row.vpq += r.vpq;
      row.pq += r.pq;
      row.seconds += r.seconds;
    }
    const double k = static_cast<double>(row.runs.size());
    row.vpq /= k;
    row.pq /= k;
    row.seconds /= k;
  }
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-16s %-12s %8s %8s %10s\n", "grid", "variant", "VPQ", "PQ",
                "seconds");
  out += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-16s %-12s %8.4f %8.4f %10.1f\n", r.variant.grid.c_str(),
                  r.variant.name.c_str(), r.vpq, r.pq, r.seconds);
    out += line;
  }
  return out;
}

void to_json(Json& j, const AblationRow& row) {
  Json runs = Json::array();
  for (const auto& r : row.runs) {
    runs.push_back({{"seed", r.seed}, {"vpq", r.vpq}, {"pq", r.pq}, {"seconds", r.seconds}});
  }
  j = {{"grid", row.variant.grid}, {"variant", row.variant.name},
       {"overrides", row.variant.overrides}, {"vpq", row.vpq}, {"pq", row.pq},
       {"seconds", row.seconds}, {"runs", runs}};
}

}  // namespace panoslot
