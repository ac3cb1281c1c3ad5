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

#include <numbers>
#include <string>

#include "covmeta/autodiff.h"

namespace covmeta {

namespace detail {

inline void require_positive(const Tensor& sigma, const char* op) {
  for (double s : sigma.data()) {
    if (!(s > 0.0)) throw DomainError(std::string(op) + ": sigma must be positive, got " + std::to_string(s));
  }
}

}  // namespace detail

// Sum over elements of log N(x | mu, sigma^2):
//   sum_j [ -1/2 log(2 pi sigma_j^2) - (x_j - mu_j)^2 / (2 sigma_j^2) ].
// mu and sigma broadcast against x.
template <class T>
T gaussian_log_density(const T& x, const T& mu, const T& sigma) {
  using O = Ops<T>;
  detail::require_positive(O::value(sigma), "gaussian_log_density");
  const T var = O::square(sigma);
  const T resid = O::sub(x, mu);
  const T quad = O::div(O::square(resid), O::scale(var, 2.0));
  const T norm = O::scale(O::log(O::scale(var, 2.0 * std::numbers::pi)), -0.5);
  return O::sum(O::sub(O::broadcast_to(norm, O::shape(quad)), quad));
}

// KL( N(mu, diag sigma^2) || N(0, I) ) = 1/2 sum_d (mu_d^2 + sigma_d^2 - log sigma_d^2 - 1).
template <class T>
T gaussian_kl_to_standard(const T& mu, const T& sigma) {
  using O = Ops<T>;
  detail::require_positive(O::value(sigma), "gaussian_kl_to_standard");
  const T var = O::square(sigma);
  const T terms = O::add_scalar(O::sub(O::add(O::square(mu), var), O::log(var)), -1.0);
  return O::scale(O::sum(terms), 0.5);
}

}  // namespace covmeta
