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

#ifndef PANOSLOT_PARAMETER_HPP_
#define PANOSLOT_PARAMETER_HPP_

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "panoslot/tensor.hpp"

namespace panoslot {

enum class InitScheme { kZeros, kOnes, kKaimingUniform, kNormal };

struct InitSpec {
  InitScheme scheme = InitScheme::kZeros;
  // Standard deviation for kNormal, gain for kKaimingUniform.
  double scale = 1.0;
  std::size_t fan_in = 1;
  std::uint64_t seed = 0;

  static InitSpec zeros() { return {InitScheme::kZeros, 0.0, 1, 0}; }
  static InitSpec ones() { return {InitScheme::kOnes, 0.0, 1, 0}; }
  static InitSpec kaiming(std::size_t fan_in) {
    return {InitScheme::kKaimingUniform, std::sqrt(2.0), fan_in, 0};
  }
  static InitSpec normal(double stddev) {
    return {InitScheme::kNormal, stddev, 1, 0};
  }
};

template <typename Scalar>
struct Parameter {
  std::string name;
  Tensor<Scalar> value;
  Tensor<Scalar> grad;
  InitSpec init;

  void zero_grad() { grad.fill(Scalar(0)); }
};

// FNV-1a, used to derive per-parameter seeds that do not depend on the order
// in which parameters are created.
inline std::uint64_t hash_name(const std::string& name) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

template <typename Scalar>
void initialize(Tensor<Scalar>& t, const InitSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  switch (spec.scheme) {
    case InitScheme::kZeros:
      t.fill(Scalar(0));
      break;
    case InitScheme::kOnes:
      t.fill(Scalar(1));
      break;
    case InitScheme::kKaimingUniform: {
      // Uniform(-b, b) with b = gain * sqrt(3 / fan_in).
      const double bound =
          spec.scale * std::sqrt(3.0 / static_cast<double>(spec.fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : t.data()) v = static_cast<Scalar>(dist(rng));
      break;
    }
    case InitScheme::kNormal: {
      std::normal_distribution<double> dist(0.0, spec.scale);
      for (auto& v : t.data()) v = static_cast<Scalar>(dist(rng));
      break;
    }
  }
}

// Owns every learnable tensor of a model. Iteration order is creation order,
// which is also the checkpoint record order.
template <typename Scalar>
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : seed_(seed) {}
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter<Scalar>& create(const std::string& name, Shape shape,
                            InitSpec init) {
    if (index_.count(name)) {
      throw ConfigError("duplicate parameter name: " + name);
    }
    init.seed = seed_ ^ hash_name(name);
    auto p = std::make_unique<Parameter<Scalar>>();
    p->name = name;
    p->value = Tensor<Scalar>(shape);
    p->grad = Tensor<Scalar>(std::move(shape));
    p->init = init;
    initialize(p->value, init);
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Parameter<Scalar>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Parameter<Scalar>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  Parameter<Scalar>& at(const std::string& name) {
    auto* p = find(name);
    if (!p) throw ConfigError("unknown parameter: " + name);
    return *p;
  }

  std::size_t count() const { return params_.size(); }
  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  std::uint64_t seed() const { return seed_; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::uint64_t seed_;
  std::vector<std::unique_ptr<Parameter<Scalar>>> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace panoslot

#endif  // PANOSLOT_PARAMETER_HPP_
