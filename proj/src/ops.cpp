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

#include "panoslot/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>

namespace panoslot {
namespace {

template <typename S>
void require_same_tape(const Var<S>& a, const Var<S>& b, const char* op) {
  if (&a.tape() != &b.tape()) {
    throw ShapeError(std::string(op) + ": operands live on different tapes");
  }
}

template <typename S>
void require_same_shape(const Var<S>& a, const Var<S>& b, const char* op) {
  require_same_tape(a, b, op);
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

template <typename S>
void require_rank(const Var<S>& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " +
                     std::to_string(rank) + ", got " +
                     shape_string(a.shape()));
  }
}

// Splits a shape around `axis` into (outer, extent, inner) element counts.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <typename S>
using Mat = RowMatrix<S>;

// Unary elementwise op whose derivative is a function of (input, output).
template <typename S, typename Fwd, typename Deriv>
Var<S> unary(const Var<S>& a, const char* op, Fwd fwd, Deriv deriv) {
  Tensor<S> out(a.shape());
  const auto& in = a.value();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  const std::size_t ia = a.index();
  return a.tape().record(
      op, std::move(out), {ia}, [ia, deriv](Tape<S>& t, std::size_t self) {
        const auto& x = t.value(ia);
        const auto& y = t.value(self);
        const auto& g = t.grad(self);
        auto& gx = t.grad(ia);
        for (std::size_t i = 0; i < x.size(); ++i) {
          gx[i] += g[i] * deriv(x[i], y[i]);
        }
      });
}

}  // namespace

template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  require_same_tape(a, b, "matmul");
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner dimensions disagree, " +
                     shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  Tensor<S> out({a.dim(0), b.dim(1)});
  out.matrix().noalias() = a.value().matrix() * b.value().matrix();
  const std::size_t ia = a.index(), ib = b.index();
  return a.tape().record(
      "matmul", std::move(out), {ia, ib}, [ia, ib](Tape<S>& t, std::size_t self) {
        const auto g = t.grad(self).matrix();
        if (t.requires_grad(ia)) {
          t.grad(ia).matrix().noalias() +=
              g * t.value(ib).matrix().transpose();
        }
        if (t.requires_grad(ib)) {
          t.grad(ib).matrix().noalias() +=
              t.value(ia).matrix().transpose() * g;
        }
      });
}

template <typename S>
Var<S> transpose(const Var<S>& a) {
  require_rank(a, 2, "transpose");
  Tensor<S> out({a.dim(1), a.dim(0)});
  out.matrix() = a.value().matrix().transpose();
  const std::size_t ia = a.index();
  return a.tape().record("transpose", std::move(out), {ia},
                         [ia](Tape<S>& t, std::size_t self) {
                           t.grad(ia).matrix() +=
                               t.grad(self).matrix().transpose();
                         });
}

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  require_same_shape(a, b, "add");
  Tensor<S> out(a.shape());
  out.matrix() = a.value().matrix() + b.value().matrix();
  const std::size_t ia = a.index(), ib = b.index();
  return a.tape().record(
      "add", std::move(out), {ia, ib}, [ia, ib](Tape<S>& t, std::size_t self) {
        const auto g = t.grad(self).matrix();
        if (t.requires_grad(ia)) t.grad(ia).matrix() += g;
        if (t.requires_grad(ib)) t.grad(ib).matrix() += g;
      });
}

template <typename S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  require_same_shape(a, b, "sub");
  Tensor<S> out(a.shape());
  out.matrix() = a.value().matrix() - b.value().matrix();
  const std::size_t ia = a.index(), ib = b.index();
  return a.tape().record(
      "sub", std::move(out), {ia, ib}, [ia, ib](Tape<S>& t, std::size_t self) {
        const auto g = t.grad(self).matrix();
        if (t.requires_grad(ia)) t.grad(ia).matrix() += g;
        if (t.requires_grad(ib)) t.grad(ib).matrix() -= g;
      });
}

template <typename S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
  require_same_shape(a, b, "mul");
  Tensor<S> out(a.shape());
  out.matrix() = a.value().matrix().cwiseProduct(b.value().matrix());
  const std::size_t ia = a.index(), ib = b.index();
  return a.tape().record(
      "mul", std::move(out), {ia, ib}, [ia, ib](Tape<S>& t, std::size_t self) {
        const auto g = t.grad(self).matrix();
        if (t.requires_grad(ia)) {
          t.grad(ia).matrix() += g.cwiseProduct(t.value(ib).matrix());
        }
        if (t.requires_grad(ib)) {
          t.grad(ib).matrix() += g.cwiseProduct(t.value(ia).matrix());
        }
      });
}

template <typename S>
Var<S> div(const Var<S>& a, const Var<S>& b) {
  require_same_shape(a, b, "div");
  Tensor<S> out(a.shape());
  out.matrix() = a.value().matrix().cwiseQuotient(b.value().matrix());
  const std::size_t ia = a.index(), ib = b.index();
  return a.tape().record(
      "div", std::move(out), {ia, ib}, [ia, ib](Tape<S>& t, std::size_t self) {
        const auto g = t.grad(self).matrix();
        const auto bv = t.value(ib).matrix();
        if (t.requires_grad(ia)) t.grad(ia).matrix() += g.cwiseQuotient(bv);
        if (t.requires_grad(ib)) {
          const auto y = t.value(self).matrix();
          t.grad(ib).matrix() -= g.cwiseProduct(y).cwiseQuotient(bv);
        }
      });
}

template <typename S>
Var<S> add_bias(const Var<S>& a, const Var<S>& bias) {
  require_same_tape(a, bias, "add_bias");
  if (bias.value().size() != a.value().cols()) {
    throw ShapeError("add_bias: bias " + shape_string(bias.shape()) +
                     " does not match last axis of " +
                     shape_string(a.shape()));
  }
  Tensor<S> out(a.shape());
  out.matrix() = a.value().matrix().rowwise() +
                 bias.value().matrix().row(0);
  const std::size_t ia = a.index(), ib = bias.index();
  return a.tape().record(
      "add_bias", std::move(out), {ia, ib},
      [ia, ib](Tape<S>& t, std::size_t self) {
        const auto g = t.grad(self).matrix();
        if (t.requires_grad(ia)) t.grad(ia).matrix() += g;
        if (t.requires_grad(ib)) {
          t.grad(ib).matrix().row(0) += g.colwise().sum();
        }
      });
}

template <typename S>
Var<S> scale(const Var<S>& a, S factor) {
  Tensor<S> out(a.shape());
  out.matrix() = a.value().matrix() * factor;
  const std::size_t ia = a.index();
  return a.tape().record("scale", std::move(out), {ia},
                         [ia, factor](Tape<S>& t, std::size_t self) {
                           t.grad(ia).matrix() += t.grad(self).matrix() * factor;
                         });
}

template <typename S>
Var<S> add_scalar(const Var<S>& a, S value) {
  Tensor<S> out(a.shape());
  out.matrix() = a.value().matrix().array() + value;
  const std::size_t ia = a.index();
  return a.tape().record("add_scalar", std::move(out), {ia},
                         [ia](Tape<S>& t, std::size_t self) {
                           t.grad(ia).matrix() += t.grad(self).matrix();
                         });
}

template <typename S>
Var<S> exp(const Var<S>& a) {
  return unary(
      a, "exp", [](S x) { return std::exp(x); },
      [](S, S y) { return y; });
}

template <typename S>
Var<S> log(const Var<S>& a) {
  for (S v : a.value().data()) {
    if (!(v > S(0))) throw NumericError("log of non-positive value");
  }
  return unary(
      a, "log", [](S x) { return std::log(x); },
      [](S x, S) { return S(1) / x; });
}

template <typename S>
Var<S> relu(const Var<S>& a) {
  return unary(
      a, "relu", [](S x) { return x > S(0) ? x : S(0); },
      [](S x, S) { return x > S(0) ? S(1) : S(0); });
}

template <typename S>
Var<S> gelu(const Var<S>& a) {
  constexpr S kInvSqrt2 = S(0.70710678118654752440);
  constexpr S kInvSqrt2Pi = S(0.39894228040143267794);
  return unary(
      a, "gelu",
      [](S x) { return S(0.5) * x * (S(1) + std::erf(x * kInvSqrt2)); },
      [](S x, S) {
        return S(0.5) * (S(1) + std::erf(x * kInvSqrt2)) +
               x * kInvSqrt2Pi * std::exp(S(-0.5) * x * x);
      });
}

template <typename S>
Var<S> softmax(const Var<S>& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) +
                     " out of range for " + shape_string(x.shape()));
  }
  const AxisSplit sp = split_axis(x.shape(), axis);
  const auto& in = x.value();
  Tensor<S> out(x.shape());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.extent * sp.inner + i;
      S mx = in[base];
      for (std::size_t k = 1; k < sp.extent; ++k) {
        mx = std::max(mx, in[base + k * sp.inner]);
      }
      S total = 0;
      for (std::size_t k = 0; k < sp.extent; ++k) {
        const S e = std::exp(in[base + k * sp.inner] - mx);
        out[base + k * sp.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < sp.extent; ++k) {
        out[base + k * sp.inner] /= total;
      }
    }
  }
  const std::size_t ix = x.index();
  return x.tape().record(
      "softmax", std::move(out), {ix}, [ix, sp](Tape<S>& t, std::size_t self) {
        const auto& y = t.value(self);
        const auto& g = t.grad(self);
        auto& gx = t.grad(ix);
        for (std::size_t o = 0; o < sp.outer; ++o) {
          for (std::size_t i = 0; i < sp.inner; ++i) {
            const std::size_t base = o * sp.extent * sp.inner + i;
            S dot = 0;
            for (std::size_t k = 0; k < sp.extent; ++k) {
              const std::size_t j = base + k * sp.inner;
              dot += g[j] * y[j];
            }
            for (std::size_t k = 0; k < sp.extent; ++k) {
              const std::size_t j = base + k * sp.inner;
              gx[j] += y[j] * (g[j] - dot);
            }
          }
        }
      });
}

template <typename S>
Var<S> log_softmax(const Var<S>& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw ShapeError("log_softmax: axis " + std::to_string(axis) +
                     " out of range for " + shape_string(x.shape()));
  }
  const AxisSplit sp = split_axis(x.shape(), axis);
  const auto& in = x.value();
  Tensor<S> out(x.shape());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.extent * sp.inner + i;
      S mx = in[base];
      for (std::size_t k = 1; k < sp.extent; ++k) {
        mx = std::max(mx, in[base + k * sp.inner]);
      }
      S total = 0;
      for (std::size_t k = 0; k < sp.extent; ++k) {
        total += std::exp(in[base + k * sp.inner] - mx);
      }
      const S lse = mx + std::log(total);
      for (std::size_t k = 0; k < sp.extent; ++k) {
        out[base + k * sp.inner] = in[base + k * sp.inner] - lse;
      }
    }
  }
  const std::size_t ix = x.index();
  return x.tape().record(
      "log_softmax", std::move(out), {ix},
      [ix, sp](Tape<S>& t, std::size_t self) {
        const auto& y = t.value(self);
        const auto& g = t.grad(self);
        auto& gx = t.grad(ix);
        for (std::size_t o = 0; o < sp.outer; ++o) {
          for (std::size_t i = 0; i < sp.inner; ++i) {
            const std::size_t base = o * sp.extent * sp.inner + i;
            S gsum = 0;
            for (std::size_t k = 0; k < sp.extent; ++k) {
              gsum += g[base + k * sp.inner];
            }
            for (std::size_t k = 0; k < sp.extent; ++k) {
              const std::size_t j = base + k * sp.inner;
              gx[j] += g[j] - std::exp(y[j]) * gsum;
            }
          }
        }
      });
}

template <typename S>
Var<S> layer_norm(const Var<S>& x, const Var<S>& gain, const Var<S>& bias,
                  S eps) {
  require_same_tape(x, gain, "layer_norm");
  require_same_tape(x, bias, "layer_norm");
  const std::size_t c = x.value().cols();
  if (gain.value().size() != c || bias.value().size() != c) {
    throw ShapeError("layer_norm: channel mismatch, input " +
                     shape_string(x.shape()) + ", gain " +
                     shape_string(gain.shape()) + ", bias " +
                     shape_string(bias.shape()));
  }
  const auto xm = x.value().matrix();
  const Eigen::Index rows = xm.rows();
  auto xhat = std::make_shared<Mat<S>>(rows, static_cast<Eigen::Index>(c));
  auto inv_std = std::make_shared<Eigen::Matrix<S, Eigen::Dynamic, 1>>(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const S mu = xm.row(r).mean();
    const S var = (xm.row(r).array() - mu).square().mean();
    (*inv_std)(r) = S(1) / std::sqrt(var + eps);
    xhat->row(r) = (xm.row(r).array() - mu) * (*inv_std)(r);
  }
  Tensor<S> out(x.shape());
  out.matrix() =
      (xhat->array().rowwise() * gain.value().matrix().row(0).array())
          .rowwise() +
      bias.value().matrix().row(0).array();
  const std::size_t ix = x.index(), ig = gain.index(), ib = bias.index();
  return x.tape().record(
      "layer_norm", std::move(out), {ix, ig, ib},
      [ix, ig, ib, xhat, inv_std](Tape<S>& t, std::size_t self) {
        const auto g = t.grad(self).matrix();
        if (t.requires_grad(ig)) {
          t.grad(ig).matrix().row(0) +=
              g.cwiseProduct(*xhat).colwise().sum();
        }
        if (t.requires_grad(ib)) t.grad(ib).matrix().row(0) += g.colwise().sum();
        if (t.requires_grad(ix)) {
          const auto gamma = t.value(ig).matrix().row(0).array();
          Mat<S> gxhat = (g.array().rowwise() * gamma).matrix();
          auto gx = t.grad(ix).matrix();
          for (Eigen::Index r = 0; r < gxhat.rows(); ++r) {
            const S m1 = gxhat.row(r).mean();
            const S m2 = gxhat.row(r).cwiseProduct(xhat->row(r)).mean();
            gx.row(r).array() += (*inv_std)(r) * (gxhat.row(r).array() - m1 -
                                                  xhat->row(r).array() * m2);
          }
        }
      });
}

template <typename S>
Var<S> l2_normalize_rows(const Var<S>& x, S eps) {
  const auto xm = x.value().matrix();
  auto norms = std::make_shared<Eigen::Matrix<S, Eigen::Dynamic, 1>>(xm.rows());
  for (Eigen::Index r = 0; r < xm.rows(); ++r) {
    (*norms)(r) = std::sqrt(xm.row(r).squaredNorm() + eps);
  }
  Tensor<S> out(x.shape());
  out.matrix() = xm.array().colwise() / norms->array();
  const std::size_t ix = x.index();
  return x.tape().record(
      "l2_normalize_rows", std::move(out), {ix},
      [ix, norms](Tape<S>& t, std::size_t self) {
        const auto g = t.grad(self).matrix();
        const auto y = t.value(self).matrix();
        auto gx = t.grad(ix).matrix();
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          const S dot = g.row(r).dot(y.row(r));
          gx.row(r) += (g.row(r) - y.row(r) * dot) / (*norms)(r);
        }
      });
}

template <typename S>
Var<S> sum(const Var<S>& a) {
  Tensor<S> out = Tensor<S>::scalar(a.value().matrix().sum());
  const std::size_t ia = a.index();
  return a.tape().record("sum", std::move(out), {ia},
                         [ia](Tape<S>& t, std::size_t self) {
                           t.grad(ia).matrix().array() += t.grad(self)[0];
                         });
}

template <typename S>
Var<S> mean(const Var<S>& a) {
  const S n = static_cast<S>(a.value().size());
  return scale(sum(a), S(1) / n);
}

template <typename S>
Var<S> reduce_sum(const Var<S>& a, std::size_t axis) {
  require_rank(a, 2, "reduce_sum");
  if (axis > 1) throw ShapeError("reduce_sum: axis must be 0 or 1");
  const auto am = a.value().matrix();
  Tensor<S> out(Shape{axis == 0 ? a.dim(1) : a.dim(0)});
  if (axis == 0) {
    out.matrix().row(0) = am.colwise().sum();
  } else {
    out.matrix().row(0) = am.rowwise().sum().transpose();
  }
  const std::size_t ia = a.index();
  return a.tape().record(
      "reduce_sum", std::move(out), {ia}, [ia, axis](Tape<S>& t, std::size_t self) {
        const auto g = t.grad(self).matrix().row(0);
        auto ga = t.grad(ia).matrix();
        if (axis == 0) {
          ga.rowwise() += g;
        } else {
          ga.colwise() += g.transpose();
        }
      });
}

template <typename S>
Var<S> reshape(const Var<S>& a, Shape shape) {
  Tensor<S> out = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.index();
  return a.tape().record("reshape", std::move(out), {ia},
                         [ia](Tape<S>& t, std::size_t self) {
                           auto& ga = t.grad(ia);
                           const auto& g = t.grad(self);
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             ga[i] += g[i];
                           }
                         });
}

template <typename S>
Var<S> concat(const std::vector<Var<S>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& ref = parts[0].shape();
  if (axis >= ref.size()) {
    throw ShapeError("concat: axis out of range for " + shape_string(ref));
  }
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    require_same_tape(parts[0], p, "concat");
    const Shape& s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) {
      ok = d == axis || s[d] == ref[d];
    }
    if (!ok) {
      throw ShapeError("concat: incompatible shapes " + shape_string(ref) +
                       " and " + shape_string(s));
    }
    out_shape[axis] += s[axis];
  }
  const AxisSplit osp = split_axis(out_shape, axis);
  Tensor<S> out(out_shape);
  std::vector<std::size_t> inputs;
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const AxisSplit sp = split_axis(p.shape(), axis);
    const std::size_t block = sp.extent * sp.inner;
    const auto& v = p.value();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(v.raw() + o * block, block,
                  out.raw() + o * osp.extent * osp.inner + offset * sp.inner);
    }
    inputs.push_back(p.index());
    offsets.push_back(offset);
    offset += sp.extent;
  }
  return parts[0].tape().record(
      "concat", std::move(out), inputs,
      [inputs, offsets, axis, osp](Tape<S>& t, std::size_t self) {
        const auto& g = t.grad(self);
        for (std::size_t k = 0; k < inputs.size(); ++k) {
          if (!t.requires_grad(inputs[k])) continue;
          auto& gp = t.grad(inputs[k]);
          const AxisSplit sp = split_axis(gp.shape(), axis);
          const std::size_t block = sp.extent * sp.inner;
          for (std::size_t o = 0; o < sp.outer; ++o) {
            const S* src =
                g.raw() + o * osp.extent * osp.inner + offsets[k] * sp.inner;
            S* dst = gp.raw() + o * block;
            for (std::size_t j = 0; j < block; ++j) dst[j] += src[j];
          }
        }
      });
}

template <typename S>
Var<S> slice(const Var<S>& a, std::size_t axis, std::size_t begin,
             std::size_t end) {
  if (axis >= a.rank() || begin > end || end > a.dim(axis)) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") on axis " +
                     std::to_string(axis) + " invalid for " +
                     shape_string(a.shape()));
  }
  const AxisSplit sp = split_axis(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape[axis] = end - begin;
  Tensor<S> out(out_shape);
  const std::size_t block = (end - begin) * sp.inner;
  for (std::size_t o = 0; o < sp.outer; ++o) {
    std::copy_n(a.value().raw() + o * sp.extent * sp.inner + begin * sp.inner,
                block, out.raw() + o * block);
  }
  const std::size_t ia = a.index();
  return a.tape().record(
      "slice", std::move(out), {ia},
      [ia, sp, begin, block](Tape<S>& t, std::size_t self) {
        const auto& g = t.grad(self);
        auto& ga = t.grad(ia);
        for (std::size_t o = 0; o < sp.outer; ++o) {
          S* dst = ga.raw() + o * sp.extent * sp.inner + begin * sp.inner;
          const S* src = g.raw() + o * block;
          for (std::size_t j = 0; j < block; ++j) dst[j] += src[j];
        }
      });
}

template <typename S>
Var<S> pick(const Var<S>& a, const std::vector<std::size_t>& index) {
  require_rank(a, 2, "pick");
  if (index.size() != a.dim(0)) {
    throw ShapeError("pick: " + std::to_string(index.size()) +
                     " indices for " + shape_string(a.shape()));
  }
  const std::size_t cols = a.dim(1);
  Tensor<S> out(Shape{a.dim(0)});
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= cols) throw ShapeError("pick: index out of range");
    out[r] = a.value()[r * cols + index[r]];
  }
  const std::size_t ia = a.index();
  return a.tape().record(
      "pick", std::move(out), {ia}, [ia, index, cols](Tape<S>& t, std::size_t self) {
        const auto& g = t.grad(self);
        auto& ga = t.grad(ia);
        for (std::size_t r = 0; r < index.size(); ++r) {
          ga[r * cols + index[r]] += g[r];
        }
      });
}

template <typename S>
Var<S> gather_rows(const Var<S>& a, const std::vector<std::size_t>& rows) {
  require_rank(a, 2, "gather_rows");
  const std::size_t n = a.dim(0);
  Tensor<S> out({rows.size(), a.dim(1)});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) throw ShapeError("gather_rows: row out of range");
    out.matrix().row(static_cast<Eigen::Index>(r)) =
        a.value().matrix().row(static_cast<Eigen::Index>(rows[r]));
  }
  const std::size_t ia = a.index();
  return a.tape().record(
      "gather_rows", std::move(out), {ia}, [ia, rows](Tape<S>& t, std::size_t self) {
        const auto g = t.grad(self).matrix();
        auto ga = t.grad(ia).matrix();
        for (std::size_t r = 0; r < rows.size(); ++r) {
          ga.row(static_cast<Eigen::Index>(rows[r])) +=
              g.row(static_cast<Eigen::Index>(r));
        }
      });
}

template <typename S>
Var<S> conv2d(const Var<S>& x, const Var<S>& weight, const Var<S>& bias,
              std::size_t stride, std::size_t padding) {
  require_same_tape(x, weight, "conv2d");
  require_same_tape(x, bias, "conv2d");
  require_rank(x, 3, "conv2d");
  require_rank(weight, 4, "conv2d");
  const std::size_t h = x.dim(0), w = x.dim(1), cin = x.dim(2);
  const std::size_t k = weight.dim(0), cout = weight.dim(3);
  if (weight.dim(1) != k || weight.dim(2) != cin || bias.value().size() != cout) {
    throw ShapeError("conv2d: weight " + shape_string(weight.shape()) +
                     " / bias " + shape_string(bias.shape()) +
                     " incompatible with input " + shape_string(x.shape()));
  }
  if (stride == 0 || h + 2 * padding < k || w + 2 * padding < k) {
    throw ShapeError("conv2d: invalid stride/padding for input " +
                     shape_string(x.shape()));
  }
  const std::size_t ho = (h + 2 * padding - k) / stride + 1;
  const std::size_t wo = (w + 2 * padding - k) / stride + 1;
  const bool pointwise = k == 1 && stride == 1 && padding == 0;

  auto patches = std::make_shared<Mat<S>>();
  if (!pointwise) {
    patches->setZero(static_cast<Eigen::Index>(ho * wo),
                     static_cast<Eigen::Index>(k * k * cin));
    const S* src = x.value().raw();
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        S* row = patches->data() + (oy * wo + ox) * k * k * cin;
        for (std::size_t ky = 0; ky < k; ++ky) {
          const long iy = static_cast<long>(oy * stride + ky) -
                          static_cast<long>(padding);
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const long ix = static_cast<long>(ox * stride + kx) -
                            static_cast<long>(padding);
            if (ix < 0 || ix >= static_cast<long>(w)) continue;
            std::copy_n(src + (iy * w + ix) * cin, cin,
                        row + (ky * k + kx) * cin);
          }
        }
      }
    }
  }
  const auto wmat = Eigen::Map<const Mat<S>>(
      weight.value().raw(), static_cast<Eigen::Index>(k * k * cin),
      static_cast<Eigen::Index>(cout));
  Tensor<S> out({ho, wo, cout});
  if (pointwise) {
    out.matrix().noalias() = x.value().matrix() * wmat;
  } else {
    out.matrix().noalias() = *patches * wmat;
  }
  out.matrix().rowwise() += bias.value().matrix().row(0);

  const std::size_t ixn = x.index(), iw = weight.index(), ib = bias.index();
  return x.tape().record(
      "conv2d", std::move(out), {ixn, iw, ib},
      [=](Tape<S>& t, std::size_t self) {
        const auto g = t.grad(self).matrix();
        const Eigen::Index kk = static_cast<Eigen::Index>(k * k * cin);
        if (t.requires_grad(ib)) t.grad(ib).matrix().row(0) += g.colwise().sum();
        if (t.requires_grad(iw)) {
          Eigen::Map<Mat<S>> gw(t.grad(iw).raw(), kk,
                                static_cast<Eigen::Index>(cout));
          if (pointwise) {
            gw.noalias() += t.value(ixn).matrix().transpose() * g;
          } else {
            gw.noalias() += patches->transpose() * g;
          }
        }
        if (t.requires_grad(ixn)) {
          const auto wm = Eigen::Map<const Mat<S>>(
              t.value(iw).raw(), kk, static_cast<Eigen::Index>(cout));
          if (pointwise) {
            t.grad(ixn).matrix().noalias() += g * wm.transpose();
            return;
          }
          const Mat<S> gpatch = g * wm.transpose();
          S* dst = t.grad(ixn).raw();
          for (std::size_t oy = 0; oy < ho; ++oy) {
            for (std::size_t ox = 0; ox < wo; ++ox) {
              const S* row = gpatch.data() + (oy * wo + ox) * k * k * cin;
              for (std::size_t ky = 0; ky < k; ++ky) {
                const long iy = static_cast<long>(oy * stride + ky) -
                                static_cast<long>(padding);
                if (iy < 0 || iy >= static_cast<long>(h)) continue;
                for (std::size_t kx = 0; kx < k; ++kx) {
                  const long ix = static_cast<long>(ox * stride + kx) -
                                  static_cast<long>(padding);
                  if (ix < 0 || ix >= static_cast<long>(w)) continue;
                  S* d = dst + (iy * w + ix) * cin;
                  const S* s = row + (ky * k + kx) * cin;
                  for (std::size_t c = 0; c < cin; ++c) d[c] += s[c];
                }
              }
            }
          }
        }
      });
}

template <typename S>
Var<S> conv2d_3x3(const Var<S>& x, const Var<S>& weight, const Var<S>& bias,
                  std::size_t stride) {
  if (stride != 1 && stride != 2) {
    throw ShapeError("conv2d_3x3: stride must be 1 or 2");
  }
  if (weight.rank() != 4 || weight.dim(0) != 3 || weight.dim(1) != 3) {
    throw ShapeError("conv2d_3x3: weight must be [3, 3, Cin, Cout], got " +
                     shape_string(weight.shape()));
  }
  return conv2d(x, weight, bias, stride, 1);
}

namespace {

struct ResampleTap {
  std::size_t lo, hi;
  double frac;
};

std::vector<ResampleTap> resample_taps(std::size_t in, std::size_t out) {
  std::vector<ResampleTap> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    std::size_t lo = static_cast<std::size_t>(src);
    if (lo > in - 1) lo = in - 1;
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[o] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

template <typename S>
Var<S> bilinear_resize(const Var<S>& x, std::size_t out_h, std::size_t out_w) {
  require_rank(x, 3, "bilinear_resize");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (h == 0 || w == 0 || out_h == 0 || out_w == 0) {
    throw ShapeError("bilinear_resize: empty spatial extent");
  }
  const auto ty = resample_taps(h, out_h);
  const auto tx = resample_taps(w, out_w);
  Tensor<S> out({out_h, out_w, c});
  const S* src = x.value().raw();
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    const S fy = static_cast<S>(ty[oy].frac);
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const S fx = static_cast<S>(tx[ox].frac);
      const S w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx;
      const S w10 = fy * (1 - fx), w11 = fy * fx;
      const S* p00 = src + (ty[oy].lo * w + tx[ox].lo) * c;
      const S* p01 = src + (ty[oy].lo * w + tx[ox].hi) * c;
      const S* p10 = src + (ty[oy].hi * w + tx[ox].lo) * c;
      const S* p11 = src + (ty[oy].hi * w + tx[ox].hi) * c;
      S* dst = out.raw() + (oy * out_w + ox) * c;
      for (std::size_t k = 0; k < c; ++k) {
        dst[k] = w00 * p00[k] + w01 * p01[k] + w10 * p10[k] + w11 * p11[k];
      }
    }
  }
  const std::size_t ix = x.index();
  return x.tape().record(
      "bilinear_resize", std::move(out), {ix},
      [=](Tape<S>& t, std::size_t self) {
        const S* g = t.grad(self).raw();
        S* gx = t.grad(ix).raw();
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const S fy = static_cast<S>(ty[oy].frac);
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const S fx = static_cast<S>(tx[ox].frac);
            const S w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx;
            const S w10 = fy * (1 - fx), w11 = fy * fx;
            S* p00 = gx + (ty[oy].lo * w + tx[ox].lo) * c;
            S* p01 = gx + (ty[oy].lo * w + tx[ox].hi) * c;
            S* p10 = gx + (ty[oy].hi * w + tx[ox].lo) * c;
            S* p11 = gx + (ty[oy].hi * w + tx[ox].hi) * c;
            const S* gs = g + (oy * out_w + ox) * c;
            for (std::size_t k = 0; k < c; ++k) {
              p00[k] += w00 * gs[k];
              p01[k] += w01 * gs[k];
              p10[k] += w10 * gs[k];
              p11[k] += w11 * gs[k];
            }
          }
        }
      });
}

#define PANOSLOT_INSTANTIATE_OPS(S)                                           \
  template Var<S> matmul(const Var<S>&, const Var<S>&);                       \
  template Var<S> transpose(const Var<S>&);                                   \
  template Var<S> add(const Var<S>&, const Var<S>&);                          \
  template Var<S> sub(const Var<S>&, const Var<S>&);                          \
  template Var<S> mul(const Var<S>&, const Var<S>&);                          \
  template Var<S> div(const Var<S>&, const Var<S>&);                          \
  template Var<S> add_bias(const Var<S>&, const Var<S>&);                     \
  template Var<S> scale(const Var<S>&, S);                                    \
  template Var<S> add_scalar(const Var<S>&, S);                               \
  template Var<S> exp(const Var<S>&);                                         \
  template Var<S> log(const Var<S>&);                                         \
  template Var<S> relu(const Var<S>&);                                        \
  template Var<S> gelu(const Var<S>&);                                        \
  template Var<S> softmax(const Var<S>&, std::size_t);                        \
  template Var<S> log_softmax(const Var<S>&, std::size_t);                    \
  template Var<S> layer_norm(const Var<S>&, const Var<S>&, const Var<S>&, S); \
  template Var<S> l2_normalize_rows(const Var<S>&, S);                        \
  template Var<S> sum(const Var<S>&);                                         \
  template Var<S> mean(const Var<S>&);                                        \
  template Var<S> reduce_sum(const Var<S>&, std::size_t);                     \
  template Var<S> reshape(const Var<S>&, Shape);                              \
  template Var<S> concat(const std::vector<Var<S>>&, std::size_t);            \
  template Var<S> slice(const Var<S>&, std::size_t, std::size_t, std::size_t); \
  template Var<S> pick(const Var<S>&, const std::vector<std::size_t>&);       \
  template Var<S> gather_rows(const Var<S>&, const std::vector<std::size_t>&); \
  template Var<S> conv2d(const Var<S>&, const Var<S>&, const Var<S>&,         \
                         std::size_t, std::size_t);                           \
  template Var<S> conv2d_3x3(const Var<S>&, const Var<S>&, const Var<S>&,     \
                             std::size_t);                                    \
  template Var<S> bilinear_resize(const Var<S>&, std::size_t, std::size_t);

PANOSLOT_INSTANTIATE_OPS(float)
PANOSLOT_INSTANTIATE_OPS(double)

#undef PANOSLOT_INSTANTIATE_OPS

}  // namespace panoslot
