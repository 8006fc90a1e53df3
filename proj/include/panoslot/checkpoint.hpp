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

#ifndef PANOSLOT_CHECKPOINT_HPP_
#define PANOSLOT_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <type_traits>
#include <vector>

#include "panoslot/parameter.hpp"
#include "panoslot/tensor.hpp"

// Binary checkpoint container, little-endian throughout:
//
//   magic      4 bytes  "SVPS"
//   version    u32      (currently 1)
//   count      u64      number of records
//   record*    name_len u32, name bytes (UTF-8), dtype u8 (0 = f32, 1 = f64),
//              rank u32, dims u64[rank], row-major payload
namespace panoslot {

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1 };

template <typename S>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::kF32; }
template <>
constexpr DType dtype_of<double>() { return DType::kF64; }

// One named tensor as stored on disk. Payload keeps the on-disk precision.
struct CheckpointRecord {
  std::string name;
  DType dtype = DType::kF32;
  Shape shape;
  std::vector<float> f32;
  std::vector<double> f64;

  template <typename S>
  Tensor<S> to_tensor() const {
    if (dtype == DType::kF32) {
      return Tensor<S>(shape, std::vector<S>(f32.begin(), f32.end()));
    }
    return Tensor<S>(shape, std::vector<S>(f64.begin(), f64.end()));
  }

  template <typename S>
  static CheckpointRecord from_tensor(std::string name, const Tensor<S>& t) {
    CheckpointRecord r;
    r.name = std::move(name);
    r.dtype = dtype_of<S>();
    r.shape = t.shape();
    if constexpr (std::is_same_v<S, float>) {
      r.f32.assign(t.data().begin(), t.data().end());
    } else {
      r.f64.assign(t.data().begin(), t.data().end());
    }
    return r;
  }
};

void write_checkpoint(const std::filesystem::path& path,
                      const std::vector<CheckpointRecord>& records);
std::vector<CheckpointRecord> read_checkpoint(
    const std::filesystem::path& path);

template <typename S>
std::vector<CheckpointRecord> parameter_records(const ParameterStore<S>& store) {
  std::vector<CheckpointRecord> out;
  for (const auto& p : store) {
    out.push_back(CheckpointRecord::from_tensor(p->name, p->value));
  }
  return out;
}

// Restores every parameter of `store` from `records`. Missing parameters and
// shape mismatches are collected and reported together as a ConfigError.
// Records whose names are not parameters are ignored.
template <typename S>
void load_parameters(ParameterStore<S>& store,
                     const std::vector<CheckpointRecord>& records) {
  std::string problems;
  for (auto& p : store) {
    const CheckpointRecord* rec = nullptr;
    for (const auto& r : records) {
      if (r.name == p->name) {
        rec = &r;
        break;
      }
    }
    if (!rec) {
      problems += "\n  missing parameter " + p->name;
      continue;
    }
    if (rec->shape != p->value.shape()) {
      problems += "\n  " + p->name + ": checkpoint shape " +
                  shape_string(rec->shape) + " vs model shape " +
                  shape_string(p->value.shape());
      continue;
    }
    p->value = rec->to_tensor<S>();
  }
  if (!problems.empty()) {
    throw ConfigError("incompatible checkpoint:" + problems);
  }
}

}  // namespace panoslot

#endif  // PANOSLOT_CHECKPOINT_HPP_
