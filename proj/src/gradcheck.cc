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

#include "covmeta/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace covmeta {

Tensor finite_difference_grad(const ScalarFn& f, const Tensor& theta, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_grad: step must be positive");
  Tensor grad(theta.shape());
  Tensor probe = theta;
  for (std::size_t d = 0; d < theta.size(); ++d) {
    const double orig = theta[d];
    probe[d] = orig + h;
    const double up = f(probe);
    probe[d] = orig - h;
    const double down = f(probe);
    probe[d] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericalError("finite_difference_grad: non-finite function value at coordinate " + std::to_string(d));
    }
    grad[d] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw ShapeError("relative_error: size mismatch");
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] - b[i]) * (a[i] - b[i]);
  const double denom = std::sqrt(kernels::squared_norm(a)) + std::sqrt(kernels::squared_norm(b));
  return std::sqrt(diff) / std::max(1e-8, denom);
}

}  // namespace covmeta
