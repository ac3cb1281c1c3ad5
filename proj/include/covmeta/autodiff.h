// Copyright 2026 The covmeta Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Reverse-mode automatic differentiation over dense tensors.
//
// A Tape records every operation applied to its Vars in creation order, so
// the node list is always a topologically sorted DAG. Gradients can be
// requested in two forms:
//
//   Tape::grad()       plain tensors, no new nodes; also stored in each
//                      visited node's grad slot.
//   Tape::grad_nodes() gradients recorded as new nodes on the same tape, so
//                      they can be differentiated again. Requires a tape
//                      constructed with higher_order = true.
//
// Both paths run the same vector-Jacobian rules over the same kernels, so a
// gradient computed as nodes has bit-identical values to the plain one.

#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "covmeta/tensor.h"

namespace covmeta {

enum class OpKind : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kScale,
  kAddScalar,
  kMatMul,
  kBroadcast,
  kSumTo,
  kSum,
  kMean,
  kExp,
  kLog,
  kSqrt,
  kTanh,
  kSigmoid,
  kRelu,
  kSoftplus,
  kSquare,
  kStepMul,
  kConcat,
  kSlice,
  kPad,
  kReshape,
};

const char* op_name(OpKind op);

// Per-op static arguments. Only the fields an op uses are meaningful.
struct OpAttrs {
  double scalar = 0.0;
  bool trans_a = false;
  bool trans_b = false;
  std::size_t axis = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  Shape shape;
};

struct Node {
  std::size_t id = 0;
  OpKind op = OpKind::kLeaf;
  std::array<std::size_t, 2> parents{};
  std::uint8_t num_parents = 0;
  bool requires_grad = false;
  OpAttrs attrs;
  Tensor value;
  std::optional<Tensor> grad;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  explicit Tape(bool higher_order = false) : higher_order_(higher_order) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool higher_order() const { return higher_order_; }
  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }

  // Differentiable input.
  Var leaf(Tensor value);
  // Input treated as a constant by every backward pass.
  Var constant(Tensor value);

  // Records `op` applied to `inputs`, computing its value eagerly.
  Var apply(OpKind op, std::span<const Var> inputs, OpAttrs attrs = {});

  // d root / d wrt as plain tensors. Unreachable wrt nodes get zeros.
  std::vector<Tensor> grad(Var root, std::span<const Var> wrt);
  // d root / d wrt recorded as nodes on this tape.
  std::vector<Var> grad_nodes(Var root, std::span<const Var> wrt);

 private:
  friend class Var;
  Var push(OpKind op, std::span<const Var> inputs, OpAttrs attrs, Tensor value);

  template <class G>
  std::vector<std::optional<G>> sweep(Var root, std::span<const Var> wrt, std::size_t& lo);

  bool higher_order_;
  std::deque<Node> nodes_;
};

// Differentiable operations on Vars. All inputs must live on the same tape.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);
Var broadcast_to(const Var& a, const Shape& shape);
Var sum_to(const Var& a, const Shape& shape);
Var sum(const Var& a);
Var mean(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var softplus(const Var& a);
Var square(const Var& a);
Var step_mul(const Var& a, const Var& mask);
Var concat(const Var& a, const Var& b, std::size_t axis);
Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end);
Var pad(const Var& a, const Shape& shape, std::size_t axis, std::size_t begin);
Var reshape(const Var& a, const Shape& shape);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double c, const Var& a) { return scale(a, c); }

// Uniform spelling of the operation set for code templated over the value
// type: Ops<Tensor> runs eagerly, Ops<Var> records on a tape.
template <class T>
struct Ops;

template <>
struct Ops<Tensor> {
  static const Shape& shape(const Tensor& a) { return a.shape(); }
  static const Tensor& value(const Tensor& a) { return a; }
  static Tensor add(const Tensor& a, const Tensor& b) { return kernels::add(a, b); }
  static Tensor sub(const Tensor& a, const Tensor& b) { return kernels::sub(a, b); }
  static Tensor mul(const Tensor& a, const Tensor& b) { return kernels::mul(a, b); }
  static Tensor div(const Tensor& a, const Tensor& b) { return kernels::div(a, b); }
  static Tensor neg(const Tensor& a) { return kernels::neg(a); }
  static Tensor scale(const Tensor& a, double c) { return kernels::scale(a, c); }
  static Tensor add_scalar(const Tensor& a, double c) { return kernels::add_scalar(a, c); }
  static Tensor matmul(const Tensor& a, const Tensor& b, bool ta = false, bool tb = false) {
    return kernels::matmul(a, b, ta, tb);
  }
  static Tensor broadcast_to(const Tensor& a, const Shape& s) { return kernels::broadcast_to(a, s); }
  static Tensor sum_to(const Tensor& a, const Shape& s) { return kernels::sum_to(a, s); }
  static Tensor sum(const Tensor& a) { return kernels::sum(a); }
  static Tensor mean(const Tensor& a) { return kernels::mean(a); }
  static Tensor exp(const Tensor& a) { return kernels::exp(a); }
  static Tensor log(const Tensor& a) { return kernels::log(a); }
  static Tensor sqrt(const Tensor& a) { return kernels::sqrt(a); }
  static Tensor tanh(const Tensor& a) { return kernels::tanh(a); }
  static Tensor sigmoid(const Tensor& a) { return kernels::sigmoid(a); }
  static Tensor relu(const Tensor& a) { return kernels::relu(a); }
  static Tensor softplus(const Tensor& a) { return kernels::softplus(a); }
  static Tensor square(const Tensor& a) { return kernels::square(a); }
  static Tensor step_mul(const Tensor& a, const Tensor& m) { return kernels::step_mul(a, m); }
  static Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis) { return kernels::concat(a, b, axis); }
  static Tensor slice(const Tensor& a, std::size_t axis, std::size_t b, std::size_t e) {
    return kernels::slice(a, axis, b, e);
  }
  static Tensor pad(const Tensor& a, const Shape& s, std::size_t axis, std::size_t b) {
    return kernels::pad(a, s, axis, b);
  }
  static Tensor reshape(const Tensor& a, const Shape& s) { return kernels::reshape(a, s); }
};

template <>
struct Ops<Var> {
  static const Shape& shape(const Var& a) { return a.shape(); }
  static const Tensor& value(const Var& a) { return a.value(); }
  static Var add(const Var& a, const Var& b) { return covmeta::add(a, b); }
  static Var sub(const Var& a, const Var& b) { return covmeta::sub(a, b); }
  static Var mul(const Var& a, const Var& b) { return covmeta::mul(a, b); }
  static Var div(const Var& a, const Var& b) { return covmeta::div(a, b); }
  static Var neg(const Var& a) { return covmeta::neg(a); }
  static Var scale(const Var& a, double c) { return covmeta::scale(a, c); }
  static Var add_scalar(const Var& a, double c) { return covmeta::add_scalar(a, c); }
  static Var matmul(const Var& a, const Var& b, bool ta = false, bool tb = false) {
    return covmeta::matmul(a, b, ta, tb);
  }
  static Var broadcast_to(const Var& a, const Shape& s) { return covmeta::broadcast_to(a, s); }
  static Var sum_to(const Var& a, const Shape& s) { return covmeta::sum_to(a, s); }
  static Var sum(const Var& a) { return covmeta::sum(a); }
  static Var mean(const Var& a) { return covmeta::mean(a); }
  static Var exp(const Var& a) { return covmeta::exp(a); }
  static Var log(const Var& a) { return covmeta::log(a); }
  static Var sqrt(const Var& a) { return covmeta::sqrt(a); }
  static Var tanh(const Var& a) { return covmeta::tanh(a); }
  static Var sigmoid(const Var& a) { return covmeta::sigmoid(a); }
  static Var relu(const Var& a) { return covmeta::relu(a); }
  static Var softplus(const Var& a) { return covmeta::softplus(a); }
  static Var square(const Var& a) { return covmeta::square(a); }
  static Var step_mul(const Var& a, const Var& m) { return covmeta::step_mul(a, m); }
  static Var concat(const Var& a, const Var& b, std::size_t axis) { return covmeta::concat(a, b, axis); }
  static Var slice(const Var& a, std::size_t axis, std::size_t b, std::size_t e) {
    return covmeta::slice(a, axis, b, e);
  }
  static Var pad(const Var& a, const Shape& s, std::size_t axis, std::size_t b) {
    return covmeta::pad(a, s, axis, b);
  }
  static Var reshape(const Var& a, const Shape& s) { return covmeta::reshape(a, s); }
};

}  // namespace covmeta
