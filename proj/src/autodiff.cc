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

#include "covmeta/autodiff.h"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace covmeta {

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kDiv: return "div";
    case OpKind::kNeg: return "neg";
    case OpKind::kScale: return "scale";
    case OpKind::kAddScalar: return "add_scalar";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kBroadcast: return "broadcast";
    case OpKind::kSumTo: return "sum_to";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSqrt: return "sqrt";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kRelu: return "relu";
    case OpKind::kSoftplus: return "softplus";
    case OpKind::kSquare: return "square";
    case OpKind::kStepMul: return "step_mul";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kPad: return "pad";
    case OpKind::kReshape: return "reshape";
  }
  return "unknown";
}

const Tensor& Var::value() const { return tape_->nodes_[id_].value; }

bool Var::requires_grad() const { return tape_->nodes_[id_].requires_grad; }

namespace {

std::size_t arity(OpKind op) {
  switch (op) {
    case OpKind::kLeaf: return 0;
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul:
    case OpKind::kDiv:
    case OpKind::kMatMul:
    case OpKind::kStepMul:
    case OpKind::kConcat: return 2;
    default: return 1;
  }
}

Tensor evaluate(OpKind op, const Tensor& a, const Tensor* b, const OpAttrs& at) {
  using namespace kernels;
  switch (op) {
    case OpKind::kAdd: return add(a, *b);
    case OpKind::kSub: return sub(a, *b);
    case OpKind::kMul: return mul(a, *b);
    case OpKind::kDiv: return div(a, *b);
    case OpKind::kNeg: return neg(a);
    case OpKind::kScale: return scale(a, at.scalar);
    case OpKind::kAddScalar: return add_scalar(a, at.scalar);
    case OpKind::kMatMul: return matmul(a, *b, at.trans_a, at.trans_b);
    case OpKind::kBroadcast: return broadcast_to(a, at.shape);
    case OpKind::kSumTo: return sum_to(a, at.shape);
    case OpKind::kSum: return sum(a);
    case OpKind::kMean: return mean(a);
    case OpKind::kExp: return exp(a);
    case OpKind::kLog: return log(a);
    case OpKind::kSqrt: return sqrt(a);
    case OpKind::kTanh: return tanh(a);
    case OpKind::kSigmoid: return sigmoid(a);
    case OpKind::kRelu: return relu(a);
    case OpKind::kSoftplus: return softplus(a);
    case OpKind::kSquare: return square(a);
    case OpKind::kStepMul: return step_mul(a, *b);
    case OpKind::kConcat: return concat(a, *b, at.axis);
    case OpKind::kSlice: return slice(a, at.axis, at.begin, at.end);
    case OpKind::kPad: return pad(a, at.shape, at.axis, at.begin);
    case OpKind::kReshape: return reshape(a, at.shape);
    case OpKind::kLeaf: break;
  }
  throw std::logic_error("evaluate: leaf has no forward rule");
}

// Reduces a broadcast gradient back to the operand's shape.
template <class G>
G unbroadcast(const G& g, const Shape& shape) {
  if (Ops<G>::shape(g) == shape) return g;
  return Ops<G>::sum_to(g, shape);
}

// Vector-Jacobian products. `in(k)` yields parent k, `out` the node itself
// and `g` the incoming gradient, all as G. `emit(k, grad)` receives the
// contribution for parent k; it is only called when need[k] is set.
template <class G, class In, class Emit>
void vjp(const Node& node, In&& in, const G& out, const G& g, const std::array<bool, 2>& need, Emit&& emit) {
  using O = Ops<G>;
  const OpAttrs& at = node.attrs;
  switch (node.op) {
    case OpKind::kAdd:
      if (need[0]) emit(0, unbroadcast(g, O::shape(in(0))));
      if (need[1]) emit(1, unbroadcast(g, O::shape(in(1))));
      return;
    case OpKind::kSub:
      if (need[0]) emit(0, unbroadcast(g, O::shape(in(0))));
      if (need[1]) emit(1, O::neg(unbroadcast(g, O::shape(in(1)))));
      return;
    case OpKind::kMul:
      if (need[0]) emit(0, unbroadcast(O::mul(g, in(1)), O::shape(in(0))));
      if (need[1]) emit(1, unbroadcast(O::mul(g, in(0)), O::shape(in(1))));
      return;
    case OpKind::kDiv:
      if (need[0]) emit(0, unbroadcast(O::div(g, in(1)), O::shape(in(0))));
      if (need[1]) emit(1, unbroadcast(O::neg(O::div(O::mul(g, out), in(1))), O::shape(in(1))));
      return;
    case OpKind::kNeg:
      emit(0, O::neg(g));
      return;
    case OpKind::kScale:
      emit(0, O::scale(g, at.scalar));
      return;
    case OpKind::kAddScalar:
      emit(0, g);
      return;
    case OpKind::kMatMul: {
      const bool ta = at.trans_a;
      const bool tb = at.trans_b;
      if (need[0]) emit(0, ta ? O::matmul(in(1), g, tb, true) : O::matmul(g, in(1), false, !tb));
      if (need[1]) emit(1, tb ? O::matmul(g, in(0), true, ta) : O::matmul(in(0), g, !ta, false));
      return;
    }
    case OpKind::kBroadcast:
      emit(0, O::sum_to(g, O::shape(in(0))));
      return;
    case OpKind::kSumTo:
      emit(0, O::broadcast_to(g, O::shape(in(0))));
      return;
    case OpKind::kSum:
      emit(0, O::broadcast_to(g, O::shape(in(0))));
      return;
    case OpKind::kMean: {
      const Shape& s = O::shape(in(0));
      emit(0, O::broadcast_to(O::scale(g, 1.0 / static_cast<double>(shape_size(s))), s));
      return;
    }
    case OpKind::kExp:
      emit(0, O::mul(g, out));
      return;
    case OpKind::kLog:
      emit(0, O::div(g, in(0)));
      return;
    case OpKind::kSqrt:
      emit(0, O::scale(O::div(g, out), 0.5));
      return;
    case OpKind::kTanh:
      emit(0, O::mul(g, O::add_scalar(O::neg(O::square(out)), 1.0)));
      return;
    case OpKind::kSigmoid:
      emit(0, O::mul(g, O::mul(out, O::add_scalar(O::neg(out), 1.0))));
      return;
    case OpKind::kRelu:
      emit(0, O::step_mul(g, in(0)));
      return;
    case OpKind::kSoftplus:
      emit(0, O::mul(g, O::sigmoid(in(0))));
      return;
    case OpKind::kSquare:
      emit(0, O::scale(O::mul(g, in(0)), 2.0));
      return;
    case OpKind::kStepMul:
      // The mask is piecewise constant, so it receives no gradient.
      if (need[0]) emit(0, O::step_mul(g, in(1)));
      return;
    case OpKind::kConcat: {
      const std::size_t na = O::shape(in(0))[at.axis];
      const std::size_t nb = O::shape(in(1))[at.axis];
      if (need[0]) emit(0, O::slice(g, at.axis, 0, na));
      if (need[1]) emit(1, O::slice(g, at.axis, na, na + nb));
      return;
    }
    case OpKind::kSlice:
      emit(0, O::pad(g, O::shape(in(0)), at.axis, at.begin));
      return;
    case OpKind::kPad: {
      const std::size_t n = O::shape(in(0))[at.axis];
      emit(0, O::slice(g, at.axis, at.begin, at.begin + n));
      return;
    }
    case OpKind::kReshape:
      emit(0, O::reshape(g, O::shape(in(0))));
      return;
    case OpKind::kLeaf:
      return;
  }
}

void check_same_tape(std::span<const Var> inputs, OpKind op) {
  for (const Var& v : inputs) {
    if (!v.valid()) throw std::invalid_argument(std::string(op_name(op)) + ": uninitialized Var");
    if (&v.tape() != &inputs[0].tape()) {
      throw std::invalid_argument(std::string(op_name(op)) + ": inputs live on different tapes");
    }
  }
}

}  // namespace

Var Tape::push(OpKind op, std::span<const Var> inputs, OpAttrs attrs, Tensor value) {
  Node n;
  n.id = nodes_.size();
  n.op = op;
  n.num_parents = static_cast<std::uint8_t>(inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    n.parents[k] = inputs[k].id();
    n.requires_grad = n.requires_grad || nodes_[inputs[k].id()].requires_grad;
  }
  n.attrs = std::move(attrs);
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value) {
  check_finite(value, "leaf");
  Var v = push(OpKind::kLeaf, {}, {}, std::move(value));
  nodes_.back().requires_grad = true;
  return v;
}

Var Tape::constant(Tensor value) {
  check_finite(value, "constant");
  return push(OpKind::kLeaf, {}, {}, std::move(value));
}

Var Tape::apply(OpKind op, std::span<const Var> inputs, OpAttrs attrs) {
  if (op == OpKind::kLeaf) throw std::invalid_argument("apply: use leaf() or constant() for inputs");
  if (inputs.size() != arity(op)) {
    throw std::invalid_argument(std::string(op_name(op)) + ": expected " + std::to_string(arity(op)) +
                                " inputs, got " + std::to_string(inputs.size()));
  }
  check_same_tape(inputs, op);
  if (&inputs[0].tape() != this) throw std::invalid_argument(std::string(op_name(op)) + ": Var from another tape");
  const Tensor& a = nodes_[inputs[0].id()].value;
  const Tensor* b = inputs.size() > 1 ? &nodes_[inputs[1].id()].value : nullptr;
  Tensor value;
  try {
    value = evaluate(op, a, b, attrs);
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    if (msg.rfind(op_name(op), 0) == 0) throw;
    throw ShapeError(std::string(op_name(op)) + ": " + msg);
  }
  return push(op, inputs, std::move(attrs), std::move(value));
}

template <class G>
std::vector<std::optional<G>> Tape::sweep(Var root, std::span<const Var> wrt, std::size_t& lo) {
  if (&root.tape() != this) throw std::invalid_argument("backward: root is not on this tape");
  const std::size_t top = root.id();
  if (nodes_[top].value.size() != 1) {
    throw ShapeError("backward: root must be scalar, got shape " + shape_str(nodes_[top].value.shape()));
  }
  lo = top;
  for (const Var& w : wrt) {
    if (&w.tape() != this) throw std::invalid_argument("backward: wrt node is not on this tape");
    lo = std::min(lo, w.id());
  }
  const std::size_t n = top - lo + 1;

  // relevant[i]: node lo + i lies on a path from some wrt node.
  std::vector<char> relevant(n, 0);
  std::vector<char> is_wrt(n, 0);
  for (const Var& w : wrt) {
    if (w.id() <= top) {
      relevant[w.id() - lo] = 1;
      is_wrt[w.id() - lo] = 1;
    }
  }
  for (std::size_t i = lo; i <= top; ++i) {
    if (relevant[i - lo]) continue;
    const Node& nd = nodes_[i];
    for (std::size_t k = 0; k < nd.num_parents; ++k) {
      const std::size_t p = nd.parents[k];
      if (p >= lo && relevant[p - lo]) {
        relevant[i - lo] = 1;
        break;
      }
    }
  }

  std::vector<std::optional<G>> acc(n);
  if constexpr (std::is_same_v<G, Var>) {
    acc[n - 1] = constant(Tensor::scalar(1.0));
  } else {
    acc[n - 1] = Tensor::scalar(1.0);
  }

  for (std::size_t i = top + 1; i-- > lo;) {
    const std::size_t li = i - lo;
    if (!acc[li] || !relevant[li]) continue;
    const Node& nd = nodes_[i];
    if (nd.op == OpKind::kLeaf) continue;
    std::array<bool, 2> need{false, false};
    bool any = false;
    for (std::size_t k = 0; k < nd.num_parents; ++k) {
      const std::size_t p = nd.parents[k];
      need[k] = p >= lo && relevant[p - lo];
      any = any || need[k];
    }
    if (!any) continue;
    const std::array<std::size_t, 2> parents = nd.parents;
    auto emit = [&](std::size_t k, G grad) {
      auto& slot = acc[parents[k] - lo];
      if (slot) {
        slot = Ops<G>::add(*slot, grad);
      } else {
        slot = std::move(grad);
      }
    };
    const G& g = *acc[li];
    if constexpr (std::is_same_v<G, Var>) {
      auto in = [&](std::size_t k) { return Var(this, parents[k]); };
      vjp<G>(nd, in, Var(this, i), g, need, emit);
    } else {
      auto in = [&](std::size_t k) -> const Tensor& { return nodes_[parents[k]].value; };
      vjp<G>(nd, in, nd.value, g, need, emit);
    }
    if (!is_wrt[li]) acc[li].reset();
  }
  return acc;
}

std::vector<Tensor> Tape::grad(Var root, std::span<const Var> wrt) {
  std::size_t lo = 0;
  auto acc = sweep<Tensor>(root, wrt, lo);
  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (const Var& w : wrt) {
    Tensor g;
    if (w.id() <= root.id() && acc[w.id() - lo]) {
      g = *acc[w.id() - lo];
    } else {
      g = Tensor::zeros_like(w.value());
    }
    nodes_[w.id()].grad = g;
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<Var> Tape::grad_nodes(Var root, std::span<const Var> wrt) {
  if (!higher_order_) throw std::logic_error("grad_nodes requires a higher-order tape");
  std::size_t lo = 0;
  auto acc = sweep<Var>(root, wrt, lo);
  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const Var& w : wrt) {
    if (w.id() <= root.id() && acc[w.id() - lo]) {
      out.push_back(*acc[w.id() - lo]);
    } else {
      out.push_back(constant(Tensor::zeros_like(w.value())));
    }
  }
  return out;
}

namespace {

Var apply1(OpKind op, const Var& a, OpAttrs attrs = {}) {
  const Var in[1] = {a};
  return a.tape().apply(op, in, std::move(attrs));
}

Var apply2(OpKind op, const Var& a, const Var& b, OpAttrs attrs = {}) {
  const Var in[2] = {a, b};
  return a.tape().apply(op, in, std::move(attrs));
}

}  // namespace

Var add(const Var& a, const Var& b) { return apply2(OpKind::kAdd, a, b); }
Var sub(const Var& a, const Var& b) { return apply2(OpKind::kSub, a, b); }
Var mul(const Var& a, const Var& b) { return apply2(OpKind::kMul, a, b); }
Var div(const Var& a, const Var& b) { return apply2(OpKind::kDiv, a, b); }
Var neg(const Var& a) { return apply1(OpKind::kNeg, a); }

Var scale(const Var& a, double c) {
  OpAttrs at;
  at.scalar = c;
  return apply1(OpKind::kScale, a, at);
}

Var add_scalar(const Var& a, double c) {
  OpAttrs at;
  at.scalar = c;
  return apply1(OpKind::kAddScalar, a, at);
}

Var matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  OpAttrs at;
  at.trans_a = trans_a;
  at.trans_b = trans_b;
  return apply2(OpKind::kMatMul, a, b, at);
}

Var broadcast_to(const Var& a, const Shape& shape) {
  OpAttrs at;
  at.shape = shape;
  return apply1(OpKind::kBroadcast, a, at);
}

Var sum_to(const Var& a, const Shape& shape) {
  OpAttrs at;
  at.shape = shape;
  return apply1(OpKind::kSumTo, a, at);
}

Var sum(const Var& a) { return apply1(OpKind::kSum, a); }
Var mean(const Var& a) { return apply1(OpKind::kMean, a); }
Var exp(const Var& a) { return apply1(OpKind::kExp, a); }
Var log(const Var& a) { return apply1(OpKind::kLog, a); }
Var sqrt(const Var& a) { return apply1(OpKind::kSqrt, a); }
Var tanh(const Var& a) { return apply1(OpKind::kTanh, a); }
Var sigmoid(const Var& a) { return apply1(OpKind::kSigmoid, a); }
Var relu(const Var& a) { return apply1(OpKind::kRelu, a); }
Var softplus(const Var& a) { return apply1(OpKind::kSoftplus, a); }
Var square(const Var& a) { return apply1(OpKind::kSquare, a); }
Var step_mul(const Var& a, const Var& mask) { return apply2(OpKind::kStepMul, a, mask); }

Var concat(const Var& a, const Var& b, std::size_t axis) {
  OpAttrs at;
  at.axis = axis;
  return apply2(OpKind::kConcat, a, b, at);
}

Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end) {
  OpAttrs at;
  at.axis = axis;
  at.begin = begin;
  at.end = end;
  return apply1(OpKind::kSlice, a, at);
}

Var pad(const Var& a, const Shape& shape, std::size_t axis, std::size_t begin) {
  OpAttrs at;
  at.shape = shape;
  at.axis = axis;
  at.begin = begin;
  return apply1(OpKind::kPad, a, at);
}

Var reshape(const Var& a, const Shape& shape) {
  OpAttrs at;
  at.shape = shape;
  return apply1(OpKind::kReshape, a, at);
}

}  // namespace covmeta
