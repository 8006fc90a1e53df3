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

#ifndef PANOSLOT_RETRIEVER_HPP_
#define PANOSLOT_RETRIEVER_HPP_

#include <string>

#include "panoslot/nn.hpp"
#include "panoslot/ops.hpp"

namespace panoslot {

enum class SoftmaxDim { kSlot, kSpatial };

struct RetrieverConfig {
  std::size_t channels = 32;
  // kSlot normalizes every spatial row of the correlation matrix across the
  // slots (slot competition); kSpatial is the conventional attention variant.
  SoftmaxDim softmax_dim = SoftmaxDim::kSlot;
  bool use_output_projection = false;
  // Multiplies the correlation logits. 1.0 applies no temperature.
  double logit_scale = 1.0;
};

template <typename S>
struct RetrieverOutput {
  Var<S> slots;      // [L_q, C]
  Var<S> attention;  // [D_v, L_q]
};

// Correlation + normalization + retrieval on already-projected inputs:
// M = K Q^T, A = softmax(M) over the configured axis, O = A^T V.
template <typename S>
RetrieverOutput<S> retrieve_projected(const Var<S>& query, const Var<S>& key,
                                      const Var<S>& value,
                                      const RetrieverConfig& cfg) {
  if (query.rank() != 2 || key.rank() != 2 || value.rank() != 2) {
    throw ShapeError("retriever: Q, K, V must be rank-2");
  }
  if (query.dim(0) == 0) throw ShapeError("retriever: no query slots");
  if (key.dim(0) != value.dim(0)) {
    throw ShapeError("retriever: key rows " + shape_string(key.shape()) +
                     " != value rows " + shape_string(value.shape()));
  }
  if (query.dim(1) != key.dim(1) || key.dim(1) != value.dim(1)) {
    throw ShapeError("retriever: channel mismatch Q" +
                     shape_string(query.shape()) + " K" +
                     shape_string(key.shape()) + " V" +
                     shape_string(value.shape()));
  }
  Var<S> logits = matmul(key, transpose(query));
  if (cfg.logit_scale != 1.0) logits = scale(logits, S(cfg.logit_scale));
  const std::size_t axis = cfg.softmax_dim == SoftmaxDim::kSlot ? 1 : 0;
  Var<S> attention = softmax(logits, axis);
  Var<S> out = matmul(transpose(attention), value);
  return {out, attention};
}

// Retriever block: three linear projections feeding retrieve_projected, and an
// optional output projection (off by default).
template <typename S>
class Retriever {
 public:
  Retriever() = default;
  Retriever(ParameterStore<S>& store, const std::string& name,
            const RetrieverConfig& cfg)
      : cfg_(cfg),
        theta_(store, name + ".theta", cfg.channels, cfg.channels),
        phi_(store, name + ".phi", cfg.channels, cfg.channels),
        g_(store, name + ".g", cfg.channels, cfg.channels) {
    if (cfg.channels == 0) throw ConfigError("retriever: channels must be > 0");
    if (cfg.use_output_projection) {
      out_ = Linear<S>(store, name + ".out", cfg.channels, cfg.channels);
    }
  }

  RetrieverOutput<S> operator()(const Var<S>& query, const Var<S>& key,
                                const Var<S>& value) const {
    RetrieverOutput<S> r =
        retrieve_projected(theta_(query), phi_(key), g_(value), cfg_);
    if (cfg_.use_output_projection) r.slots = out_(r.slots);
    return r;
  }

  const RetrieverConfig& config() const { return cfg_; }

 private:
  RetrieverConfig cfg_;
  Linear<S> theta_, phi_, g_, out_;
};

}  // namespace panoslot

#endif  // PANOSLOT_RETRIEVER_HPP_
