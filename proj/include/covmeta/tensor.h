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

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace covmeta {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// log/sqrt of a non-positive argument, sigma <= 0, and similar.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Raised when an operation would produce NaN or Inf.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major array of doubles. Rank 0 is not used; scalars have shape {1}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }
  static Tensor ones_like(const Tensor& t) { return Tensor(t.shape_, 1.0); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  bool empty() const { return data_.empty(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_.back() + c]; }

  // Value of a single-element tensor.
  double item() const;

  Tensor reshaped(Shape shape) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Throws NumericalError naming `op` if any element is NaN or Inf.
void check_finite(const Tensor& t, const char* op);

// Eager kernels. Binary elementwise kernels accept equal shapes, a
// single-element operand, or an operand whose shape is a trailing suffix
// of the other's.
namespace kernels {

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);

// op(a) * op(b) where op transposes when the flag is set. Rank-2 only.
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);

Tensor broadcast_to(const Tensor& a, const Shape& shape);
// Reverse of broadcast_to: sums the broadcast dimensions away.
Tensor sum_to(const Tensor& a, const Shape& shape);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor square(const Tensor& a);
// a * [mask > 0], elementwise; the relu derivative.
Tensor step_mul(const Tensor& a, const Tensor& mask);

// Concatenate along `axis`; all other dimensions must agree.
Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis);
// [begin, end) along `axis`.
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
// Embeds `a` at [begin, begin + a.dim(axis)) of a zero tensor of `shape`.
Tensor pad(const Tensor& a, const Shape& shape, std::size_t axis, std::size_t begin);
Tensor reshape(const Tensor& a, const Shape& shape);

double dot(const Tensor& a, const Tensor& b);
double squared_norm(const Tensor& a);

}  // namespace kernels
}  // namespace covmeta
