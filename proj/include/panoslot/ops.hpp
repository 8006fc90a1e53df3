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

#ifndef PANOSLOT_OPS_HPP_
#define PANOSLOT_OPS_HPP_

#include <cstddef>
#include <vector>

#include "panoslot/tape.hpp"

// Differentiable free functions over Var. Every function records its result
// on the tape of its first argument. Feature maps are [H, W, C] tensors;
// "row" functions act on the matrix view (all leading axes folded into rows).
namespace panoslot {

template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b);
template <typename S>
Var<S> transpose(const Var<S>& a);

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b);
template <typename S>
Var<S> sub(const Var<S>& a, const Var<S>& b);
template <typename S>
Var<S> mul(const Var<S>& a, const Var<S>& b);
template <typename S>
Var<S> div(const Var<S>& a, const Var<S>& b);
// a[..., C] + bias[C], broadcast over rows.
template <typename S>
Var<S> add_bias(const Var<S>& a, const Var<S>& bias);
template <typename S>
Var<S> scale(const Var<S>& a, S factor);
template <typename S>
Var<S> add_scalar(const Var<S>& a, S value);

template <typename S>
Var<S> exp(const Var<S>& a);
// Requires strictly positive input.
template <typename S>
Var<S> log(const Var<S>& a);
template <typename S>
Var<S> relu(const Var<S>& a);
// Exact (erf) GELU.
template <typename S>
Var<S> gelu(const Var<S>& a);

template <typename S>
Var<S> softmax(const Var<S>& x, std::size_t axis);
template <typename S>
Var<S> log_softmax(const Var<S>& x, std::size_t axis);
template <typename S>
Var<S> layer_norm(const Var<S>& x, const Var<S>& gain, const Var<S>& bias,
                  S eps = S(1e-5));
template <typename S>
Var<S> l2_normalize_rows(const Var<S>& x, S eps = S(1e-8));

template <typename S>
Var<S> sum(const Var<S>& a);
template <typename S>
Var<S> mean(const Var<S>& a);
// Rank-2 reduction; axis 0 yields [cols], axis 1 yields [rows].
template <typename S>
Var<S> reduce_sum(const Var<S>& a, std::size_t axis);

template <typename S>
Var<S> reshape(const Var<S>& a, Shape shape);
template <typename S>
Var<S> concat(const std::vector<Var<S>>& parts, std::size_t axis);
template <typename S>
Var<S> slice(const Var<S>& a, std::size_t axis, std::size_t begin,
             std::size_t end);
// out[r] = a[r, index[r]] for a rank-2 input.
template <typename S>
Var<S> pick(const Var<S>& a, const std::vector<std::size_t>& index);
template <typename S>
Var<S> gather_rows(const Var<S>& a, const std::vector<std::size_t>& rows);

// x: [H, W, Cin]; weight: [k, k, Cin, Cout]; bias: [Cout]. Zero padding.
template <typename S>
Var<S> conv2d(const Var<S>& x, const Var<S>& weight, const Var<S>& bias,
              std::size_t stride, std::size_t padding);
template <typename S>
Var<S> conv2d_1x1(const Var<S>& x, const Var<S>& weight, const Var<S>& bias) {
  return conv2d(x, weight, bias, 1, 0);
}
// stride 1 or 2, zero padding 1.
template <typename S>
Var<S> conv2d_3x3(const Var<S>& x, const Var<S>& weight, const Var<S>& bias,
                  std::size_t stride);

// Half-pixel-centred bilinear resampling of an [H, W, C] map.
template <typename S>
Var<S> bilinear_resize(const Var<S>& x, std::size_t out_h, std::size_t out_w);
template <typename S>
Var<S> bilinear_upsample_2x(const Var<S>& x) {
  return bilinear_resize(x, 2 * x.dim(0), 2 * x.dim(1));
}

}  // namespace panoslot

#endif  // PANOSLOT_OPS_HPP_
