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

#include "covmeta/tensor.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Core>

namespace covmeta {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimension sizes must be positive, got " + shape_str(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_str(shape_));
  }
}

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Tensor({rows, cols}, std::move(v));
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

void check_finite(const Tensor& t, const char* op) {
  // v - v is NaN exactly when v is infinite or NaN; the sum vectorizes.
  double probe = 0.0;
  for (double v : t.data()) probe += v - v;
  if (probe != 0.0) {
    throw NumericalError(std::string(op) + " produced a non-finite value (shape " + shape_str(t.shape()) + ")");
  }
}

namespace kernels {

namespace {

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

template <class F>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, F f) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape(), op);
  Tensor out(out_shape);
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  const std::size_t n = o.size();
  if (x.size() == n && y.size() == n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = f(x[i], y[i]);
  } else {
    const std::size_t na = x.size();
    const std::size_t nb = y.size();
    for (std::size_t i = 0; i < n; ++i) o[i] = f(x[i % na], y[i % nb]);
  }
  check_finite(out, op);
  return out;
}

template <class F>
Tensor unary(const Tensor& a, const char* op, F f) {
  Tensor out(a.shape());
  auto o = out.data();
  auto x = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(x[i]);
  check_finite(out, op);
  return out;
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return a;
  const std::size_t na = shape_size(a);
  const std::size_t nb = shape_size(b);
  if (nb == 1 && (na != 1 || a.size() >= b.size())) return a;
  if (na == 1) return b;
  if (is_suffix(b, a)) return a;
  if (is_suffix(a, b)) return b;
  throw ShapeError(std::string(op) + ": cannot broadcast shapes " + shape_str(a) + " and " + shape_str(b));
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(a, b, "add", [](double x, double y) { return x + y; });
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(a, b, "sub", [](double x, double y) { return x - y; });
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(a, b, "mul", [](double x, double y) { return x * y; });
}
Tensor div(const Tensor& a, const Tensor& b) {
  return binary(a, b, "div", [](double x, double y) { return x / y; });
}
Tensor neg(const Tensor& a) {
  return unary(a, "neg", [](double x) { return -x; });
}
Tensor scale(const Tensor& a, double c) {
  return unary(a, "scale", [c](double x) { return c * x; });
}
Tensor add_scalar(const Tensor& a, double c) {
  return unary(a, "add_scalar", [c](double x) { return x + c; });
}

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul: operands must be rank 2, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t m = trans_a ? a.dim(1) : a.dim(0);
  const std::size_t k = trans_a ? a.dim(0) : a.dim(1);
  const std::size_t kb = trans_b ? b.dim(1) : b.dim(0);
  const std::size_t n = trans_b ? b.dim(0) : b.dim(1);
  if (k != kb) {
    throw ShapeError("matmul: inner dimensions differ for shapes " + shape_str(a.shape()) +
                     (trans_a ? "^T" : "") + " and " + shape_str(b.shape()) + (trans_b ? "^T" : ""));
  }
  Tensor out({m, n});
  ConstMap am(a.data().data(), static_cast<Eigen::Index>(a.dim(0)), static_cast<Eigen::Index>(a.dim(1)));
  ConstMap bm(b.data().data(), static_cast<Eigen::Index>(b.dim(0)), static_cast<Eigen::Index>(b.dim(1)));
  MutMap om(out.data().data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  if (!trans_a && !trans_b) {
    om.noalias() = am * bm;
  } else if (trans_a && !trans_b) {
    om.noalias() = am.transpose() * bm;
  } else if (!trans_a && trans_b) {
    om.noalias() = am * bm.transpose();
  } else {
    om.noalias() = am.transpose() * bm.transpose();
  }
  check_finite(out, "matmul");
  return out;
}

Tensor broadcast_to(const Tensor& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  if (a.size() != 1 && !is_suffix(a.shape(), shape)) {
    throw ShapeError("broadcast: cannot broadcast " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  Tensor out(shape);
  auto o = out.data();
  auto x = a.data();
  const std::size_t na = x.size();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i % na];
  return out;
}

Tensor sum_to(const Tensor& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  const std::size_t n = shape_size(shape);
  if (n != 1 && !is_suffix(shape, a.shape())) {
    throw ShapeError("sum_to: cannot reduce " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  Tensor out(shape);
  auto o = out.data();
  auto x = a.data();
  for (std::size_t i = 0; i < x.size(); ++i) o[i % n] += x[i];
  check_finite(out, "sum_to");
  return out;
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  Tensor out = Tensor::scalar(s);
  check_finite(out, "sum");
  return out;
}

Tensor mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  Tensor out = Tensor::scalar(s / static_cast<double>(a.size()));
  check_finite(out, "mean");
  return out;
}

Tensor exp(const Tensor& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); });
}

Tensor log(const Tensor& a) {
  for (double v : a.data()) {
    if (!(v > 0.0)) throw DomainError("log: non-positive argument " + std::to_string(v));
  }
  return unary(a, "log", [](double x) { return std::log(x); });
}

Tensor sqrt(const Tensor& a) {
  for (double v : a.data()) {
    if (!(v > 0.0)) throw DomainError("sqrt: non-positive argument " + std::to_string(v));
  }
  return unary(a, "sqrt", [](double x) { return std::sqrt(x); });
}

Tensor tanh(const Tensor& a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, "sigmoid", [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

Tensor relu(const Tensor& a) {
  return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; });
}

Tensor softplus(const Tensor& a) {
  return unary(a, "softplus", [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); });
}

Tensor square(const Tensor& a) {
  return unary(a, "square", [](double x) { return x * x; });
}

Tensor step_mul(const Tensor& a, const Tensor& mask) {
  if (a.shape() != mask.shape()) {
    throw ShapeError("step_mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(mask.shape()));
  }
  Tensor out(a.shape());
  auto o = out.data();
  auto x = a.data();
  auto m = mask.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = m[i] > 0.0 ? x[i] : 0.0;
  return out;
}

namespace {

// Splits a shape into (outer, axis, inner) extents.
void split_extents(const Shape& s, std::size_t axis, std::size_t& outer, std::size_t& inner) {
  outer = 1;
  inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
}

}  // namespace

Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis) {
  if (a.rank() != b.rank() || axis >= a.rank()) {
    throw ShapeError("concat: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                     " on axis " + std::to_string(axis));
  }
  for (std::size_t i = 0; i < a.rank(); ++i) {
    if (i != axis && a.dim(i) != b.dim(i)) {
      throw ShapeError("concat: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                       " on axis " + std::to_string(axis));
    }
  }
  Shape shape = a.shape();
  shape[axis] += b.dim(axis);
  Tensor out(shape);
  std::size_t outer, inner;
  split_extents(shape, axis, outer, inner);
  const std::size_t ca = a.dim(axis) * inner;
  const std::size_t cb = b.dim(axis) * inner;
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t r = 0; r < outer; ++r) {
    std::copy_n(x.begin() + r * ca, ca, o.begin() + r * (ca + cb));
    std::copy_n(y.begin() + r * cb, cb, o.begin() + r * (ca + cb) + ca);
  }
  return out;
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= a.rank() || begin >= end || end > a.dim(axis)) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " +
                     std::to_string(axis) + " is invalid for shape " + shape_str(a.shape()));
  }
  Shape shape = a.shape();
  shape[axis] = end - begin;
  Tensor out(shape);
  std::size_t outer, inner;
  split_extents(a.shape(), axis, outer, inner);
  const std::size_t src_row = a.dim(axis) * inner;
  const std::size_t dst_row = (end - begin) * inner;
  auto o = out.data();
  auto x = a.data();
  for (std::size_t r = 0; r < outer; ++r) {
    std::copy_n(x.begin() + r * src_row + begin * inner, dst_row, o.begin() + r * dst_row);
  }
  return out;
}

Tensor pad(const Tensor& a, const Shape& shape, std::size_t axis, std::size_t begin) {
  if (shape.size() != a.rank() || axis >= shape.size() || begin + a.dim(axis) > shape[axis]) {
    throw ShapeError("pad: cannot embed " + shape_str(a.shape()) + " into " + shape_str(shape));
  }
  Tensor out(shape);
  std::size_t outer, inner;
  split_extents(shape, axis, outer, inner);
  const std::size_t dst_row = shape[axis] * inner;
  const std::size_t src_row = a.dim(axis) * inner;
  auto o = out.data();
  auto x = a.data();
  for (std::size_t r = 0; r < outer; ++r) {
    std::copy_n(x.begin() + r * src_row, src_row, o.begin() + r * dst_row + begin * inner);
  }
  return out;
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (shape_size(shape) != a.size()) {
    throw ShapeError("reshape: cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  return a.reshaped(shape);
}

double dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw ShapeError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(const Tensor& a) { return dot(a, a); }

}  // namespace kernels
}  // namespace covmeta
