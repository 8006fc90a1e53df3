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

#ifndef PANOSLOT_TAPE_HPP_
#define PANOSLOT_TAPE_HPP_

#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "panoslot/parameter.hpp"
#include "panoslot/tensor.hpp"

namespace panoslot {

template <typename Scalar>
class Tape;

// Lightweight handle to a value recorded on a Tape.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, std::size_t index) : tape_(tape), index_(index) {}

  bool valid() const { return tape_ != nullptr; }
  Tape<Scalar>& tape() const { return *tape_; }
  std::size_t index() const { return index_; }
  const Tensor<Scalar>& value() const { return tape_->value(index_); }
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(std::size_t axis) const { return value().dim(axis); }
  std::size_t rank() const { return value().rank(); }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t index_ = 0;
};

// Records forward operations in execution order and replays them in reverse
// to accumulate gradients. Entries are appended only after all of their
// inputs exist, so the vector order is a topological order.
template <typename Scalar>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // When disabled, parameters enter as constants and nothing is kept for
  // backward. Used for inference.
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
  bool grad_enabled() const { return grad_enabled_; }

  Var<Scalar> constant(Tensor<Scalar> value) {
    check_finite(value, "constant");
    nodes_.push_back(Node{std::move(value), {}, {}, {}, nullptr, false,
                          "constant"});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  Var<Scalar> parameter(Parameter<Scalar>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var<Scalar>(this, it->second);
    nodes_.push_back(Node{p.value, {}, {}, {}, grad_enabled_ ? &p : nullptr,
                          grad_enabled_, "parameter"});
    param_nodes_[&p] = nodes_.size() - 1;
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  // Appends an op result. The backward closure is dropped when no input
  // needs a gradient.
  Var<Scalar> record(const char* op, Tensor<Scalar> value,
                     std::vector<std::size_t> inputs, BackwardFn fn) {
    check_finite(value, op);
    bool needs = false;
    for (std::size_t i : inputs) needs = needs || nodes_[i].requires_grad;
    if (!needs) {
      fn = nullptr;
      inputs.clear();
    }
    nodes_.push_back(Node{std::move(value), {}, std::move(inputs),
                          std::move(fn), nullptr, needs, op});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  const Tensor<Scalar>& value(std::size_t i) const { return nodes_[i].value; }
  bool requires_grad(std::size_t i) const { return nodes_[i].requires_grad; }
  const char* op_name(std::size_t i) const { return nodes_[i].op; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient buffer of entry i, zero-initialized on first access.
  Tensor<Scalar>& grad(std::size_t i) {
    Node& n = nodes_[i];
    if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) {
      n.grad = Tensor<Scalar>(n.value.shape());
    }
    return n.grad;
  }

  // Propagates d(loss)/d(entry) to every reachable entry and accumulates into
  // Parameter::grad. The tape is cleared afterwards.
  void backward(const Var<Scalar>& loss) {
    if (loss.value().size() != 1) {
      throw ShapeError("backward() requires a scalar loss, got shape " +
                       shape_string(loss.shape()));
    }
    if (nodes_.empty()) throw ShapeError("backward() on an empty tape");
    grad(loss.index())[0] = Scalar(1);
    for (std::size_t i = loss.index() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, i);
      if (n.param) {
        if (!n.grad.all_finite()) {
          throw NumericError("non-finite gradient for parameter " +
                             n.param->name);
        }
        n.param->grad.matrix() += n.grad.matrix();
      }
    }
    clear();
  }

  void clear() {
    nodes_.clear();
    param_nodes_.clear();
  }

 private:
  struct Node {
    Tensor<Scalar> value;
    Tensor<Scalar> grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter<Scalar>* param;
    bool requires_grad;
    const char* op;
  };

  static void check_finite(const Tensor<Scalar>& t, const char* op) {
    if (!t.all_finite()) {
      throw NumericError(std::string("non-finite value produced by ") + op);
    }
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<Scalar>*, std::size_t> param_nodes_;
  bool grad_enabled_ = true;
};

}  // namespace panoslot

#endif  // PANOSLOT_TAPE_HPP_
