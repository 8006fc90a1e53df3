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

#include "panoslot/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace panoslot {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'S', 'V', 'P', 'S'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw IoError("truncated checkpoint: " + path.string());
  }
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path,
                      const std::vector<CheckpointRecord>& records) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, records.size());
  for (const auto& r : records) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
    out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(r.dtype));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.shape.size()));
    for (std::size_t d : r.shape) put<std::uint64_t>(out, d);
    if (r.dtype == DType::kF32) {
      out.write(reinterpret_cast<const char*>(r.f32.data()),
                static_cast<std::streamsize>(r.f32.size() * sizeof(float)));
    } else {
      out.write(reinterpret_cast<const char*>(r.f64.data()),
                static_cast<std::streamsize>(r.f64.size() * sizeof(double)));
    }
  }
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

std::vector<CheckpointRecord> read_checkpoint(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("not a checkpoint file (bad magic): " + path.string());
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = get<std::uint64_t>(in, path);
  std::vector<CheckpointRecord> records;
  records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    CheckpointRecord r;
    const auto name_len = get<std::uint32_t>(in, path);
    r.name.resize(name_len);
    if (!in.read(r.name.data(), name_len)) {
      throw IoError("truncated checkpoint: " + path.string());
    }
    const auto tag = get<std::uint8_t>(in, path);
    if (tag > 1) throw IoError("unknown dtype tag in checkpoint");
    r.dtype = static_cast<DType>(tag);
    const auto rank = get<std::uint32_t>(in, path);
    for (std::uint32_t d = 0; d < rank; ++d) {
      r.shape.push_back(static_cast<std::size_t>(get<std::uint64_t>(in, path)));
    }
    const std::size_t n = shape_numel(r.shape);
    bool ok;
    if (r.dtype == DType::kF32) {
      r.f32.resize(n);
      ok = static_cast<bool>(in.read(reinterpret_cast<char*>(r.f32.data()),
                                     static_cast<std::streamsize>(n * 4)));
    } else {
      r.f64.resize(n);
      ok = static_cast<bool>(in.read(reinterpret_cast<char*>(r.f64.data()),
                                     static_cast<std::streamsize>(n * 8)));
    }
    if (!ok) throw IoError("truncated checkpoint payload: " + path.string());
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace panoslot
