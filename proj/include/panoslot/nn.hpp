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

#ifndef PANOSLOT_NN_HPP_
#define PANOSLOT_NN_HPP_

#include <cmath>
#include <string>

#include "panoslot/ops.hpp"
#include "panoslot/parameter.hpp"

namespace panoslot {

// y = x W + b over the last axis. W is stored [in, out].
template <typename S>
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore<S>& store, const std::string& name, std::size_t in,
         std::size_t out, bool bias = true)
      : weight_(&store.create(name + ".weight", {in, out},
                              InitSpec::kaiming(in))),
        bias_(bias ? &store.create(name + ".bias", {out}, InitSpec::zeros())
                   : nullptr) {}

  Var<S> operator()(const Var<S>& x) const {
    Tape<S>& tape = x.tape();
    const std::size_t in = weight_->value.dim(0);
    const std::size_t out = weight_->value.dim(1);
    if (x.value().cols() != in) {
      throw ShapeError("linear " + weight_->name + ": input " +
                       shape_string(x.shape()) + " has last axis != " +
                       std::to_string(in));
    }
    const bool flat = x.rank() == 2;
    Var<S> x2 = flat ? x : reshape(x, {x.value().rows(), in});
    Var<S> y = matmul(x2, tape.parameter(*weight_));
    if (bias_) y = add_bias(y, tape.parameter(*bias_));
    if (flat) return y;
    Shape shape = x.shape();
    shape.back() = out;
    return reshape(y, shape);
  }

  Parameter<S>& weight() const { return *weight_; }
  Parameter<S>* bias() const { return bias_; }

 private:
  Parameter<S>* weight_ = nullptr;
  Parameter<S>* bias_ = nullptr;
};

template <typename S>
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterStore<S>& store, const std::string& name,
            std::size_t channels)
      : gain_(&store.create(name + ".gain", {channels}, InitSpec::ones())),
        bias_(&store.create(name + ".bias", {channels}, InitSpec::zeros())) {}

  Var<S> operator()(const Var<S>& x) const {
    Tape<S>& tape = x.tape();
    return layer_norm(x, tape.parameter(*gain_), tape.parameter(*bias_));
  }

 private:
  Parameter<S>* gain_ = nullptr;
  Parameter<S>* bias_ = nullptr;
};

// Linear -> GELU -> Linear.
template <typename S>
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(ParameterStore<S>& store, const std::string& name,
              std::size_t channels, std::size_t hidden,
              std::size_t out_channels = 0)
      : in_(store, name + ".fc1", channels, hidden),
        out_(store, name + ".fc2", hidden,
             out_channels ? out_channels : channels) {}

  Var<S> operator()(const Var<S>& x) const { return out_(gelu(in_(x))); }

 private:
  Linear<S> in_;
  Linear<S> out_;
};

// Square-kernel convolution over an [H, W, C] map.
template <typename S>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParameterStore<S>& store, const std::string& name,
         std::size_t kernel, std::size_t in, std::size_t out,
         std::size_t stride = 1)
      : weight_(&store.create(name + ".weight", {kernel, kernel, in, out},
                              InitSpec::kaiming(kernel * kernel * in))),
        bias_(&store.create(name + ".bias", {out}, InitSpec::zeros())),
        kernel_(kernel),
        stride_(stride) {}

  Var<S> operator()(const Var<S>& x) const {
    Tape<S>& tape = x.tape();
    return conv2d(x, tape.parameter(*weight_), tape.parameter(*bias_), stride_,
                  kernel_ / 2);
  }

  Parameter<S>& weight() const { return *weight_; }
  Parameter<S>& bias() const { return *bias_; }

 private:
  Parameter<S>* weight_ = nullptr;
  Parameter<S>* bias_ = nullptr;
  std::size_t kernel_ = 1;
  std::size_t stride_ = 1;
};

// Single-head scaled dot-product self-attention over slot rows, with output
// projection. Softmax runs over keys, so the block is permutation-equivariant
// in its rows.
template <typename S>
class SelfAttention {
 public:
  SelfAttention() = default;
  SelfAttention(ParameterStore<S>& store, const std::string& name,
                std::size_t channels)
      : q_(store, name + ".q", channels, channels),
        k_(store, name + ".k", channels, channels),
        v_(store, name + ".v", channels, channels),
        o_(store, name + ".o", channels, channels),
        scale_(S(1) / std::sqrt(static_cast<S>(channels))) {}

  Var<S> operator()(const Var<S>& x) const {
    Var<S> logits = scale(matmul(q_(x), transpose(k_(x))), scale_);
    return o_(matmul(softmax(logits, 1), v_(x)));
  }

 private:
  Linear<S> q_, k_, v_, o_;
  S scale_ = S(1);
};

}  // namespace panoslot

#endif  // PANOSLOT_NN_HPP_
