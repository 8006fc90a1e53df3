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

#ifndef PANOSLOT_OPTIMIZER_HPP_
#define PANOSLOT_OPTIMIZER_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "panoslot/checkpoint.hpp"
#include "panoslot/errors.hpp"
#include "panoslot/parameter.hpp"

namespace panoslot {

struct OptimizerConfig {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  // Global gradient-norm clip; <= 0 disables clipping.
  double grad_clip = 1.0;
  // StepLR: lr is multiplied by gamma at each milestone epoch.
  std::vector<std::size_t> milestones = {28, 36};
  double gamma = 0.1;
  // Linear warm-up: step n (1-based) uses lr * min(1, n / warmup_steps).
  std::size_t warmup_steps = 0;

  void validate() const {
    if (!(lr > 0)) throw ConfigError("optim.lr must be > 0");
    if (!(weight_decay >= 0)) throw ConfigError("optim.weight_decay must be >= 0");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) {
      throw ConfigError("optim betas must lie in [0, 1)");
    }
    if (!(eps > 0)) throw ConfigError("optim.eps must be > 0");
    if (!(gamma > 0)) throw ConfigError("optim.gamma must be > 0");
    for (std::size_t i = 1; i < milestones.size(); ++i) {
      if (milestones[i] <= milestones[i - 1]) {
        throw ConfigError("optim.milestones must be strictly increasing");
      }
    }
  }

  double lr_at_epoch(std::size_t epoch) const {
    double v = lr;
    for (std::size_t m : milestones) {
      if (epoch >= m) v *= gamma;
    }
    return v;
  }
};

// AdamW with decoupled weight decay, StepLR schedule and global-norm
// gradient clipping. Moments are kept in double regardless of S.
template <typename S>
class AdamW {
 public:
  AdamW(ParameterStore<S>& store, OptimizerConfig cfg) : store_(store), cfg_(std::move(cfg)) {
    cfg_.validate();
    for (const auto& p : store_) {
      m_.emplace_back(p->value.size(), 0.0);
      v_.emplace_back(p->value.size(), 0.0);
    }
  }

  void set_epoch(std::size_t epoch) { lr_ = cfg_.lr_at_epoch(epoch); }
  double learning_rate() const { return lr_; }
  std::size_t steps() const { return step_; }

  // Applies one update from the accumulated gradients, then zeroes them.
  // Returns the gradient norm before clipping.
  double step() {
    double sq = 0.0;
    for (const auto& p : store_) {
      for (S g : p->grad.data()) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
    const double clip = cfg_.grad_clip > 0 && norm > cfg_.grad_clip ? cfg_.grad_clip / norm : 1.0;
    ++step_;
    const double warm = cfg_.warmup_steps
                            ? std::min(1.0, static_cast<double>(step_) /
                                                static_cast<double>(cfg_.warmup_steps))
                            : 1.0;
    const double lr = lr_ * warm;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    std::size_t k = 0;
    for (auto& p : store_) {
      auto& m = m_[k];
      auto& v = v_[k];
      ++k;
      auto value = p->value.data();
      const auto& grad = p->grad.data();
      for (std::size_t i = 0; i < value.size(); ++i) {
        const double g = static_cast<double>(grad[i]) * clip;
        m[i] = cfg_.beta1 * m[i] + (1 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1 - cfg_.beta2) * g * g;
        double x = static_cast<double>(value[i]);
        x -= lr * cfg_.weight_decay * x;
        x -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
        value[i] = static_cast<S>(x);
      }
    }
    store_.zero_grad();
    return norm;
  }

  // Moments as "optim.m.<name>" / "optim.v.<name>" plus a step counter.
  std::vector<CheckpointRecord> state_records() const {
    std::vector<CheckpointRecord> out;
    std::size_t k = 0;
    for (const auto& p : store_) {
      out.push_back(CheckpointRecord::from_tensor(
          "optim.m." + p->name, Tensor<double>(p->value.shape(), m_[k])));
      out.push_back(CheckpointRecord::from_tensor(
          "optim.v." + p->name, Tensor<double>(p->value.shape(), v_[k])));
      ++k;
    }
    out.push_back(CheckpointRecord::from_tensor(
        "optim.step", Tensor<double>::scalar(static_cast<double>(step_))));
    return out;
  }

  void load_state(const std::vector<CheckpointRecord>& records) {
    auto find = [&](const std::string& name) -> const CheckpointRecord& {
      for (const auto& r : records) {
        if (r.name == name) return r;
      }
      throw ConfigError("checkpoint lacks optimizer record " + name);
    };
    std::size_t k = 0;
    for (const auto& p : store_) {
      const auto& m = find("optim.m." + p->name);
      const auto& v = find("optim.v." + p->name);
      if (m.shape != p->value.shape() || v.shape != p->value.shape()) {
        throw ConfigError("optimizer state shape mismatch for " + p->name);
      }
      const Tensor<double> mt = m.template to_tensor<double>(), vt = v.template to_tensor<double>();
      m_[k].assign(mt.data().begin(), mt.data().end());
      v_[k].assign(vt.data().begin(), vt.data().end());
      ++k;
    }
    step_ = static_cast<std::size_t>(find("optim.step").template to_tensor<double>()[0]);
  }

 private:
  ParameterStore<S>& store_;
  OptimizerConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t step_ = 0;
  double lr_ = cfg_.lr;
};

}  // namespace panoslot

#endif  // PANOSLOT_OPTIMIZER_HPP_
