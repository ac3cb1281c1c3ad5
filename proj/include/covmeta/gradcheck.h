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

#include <functional>

#include "covmeta/tensor.h"

namespace covmeta {

using ScalarFn = std::function<double(const Tensor&)>;

// Central differences (f(theta + h e_d) - f(theta - h e_d)) / 2h for every
// coordinate d. Throws NumericalError if f is non-finite at a probe.
Tensor finite_difference_grad(const ScalarFn& f, const Tensor& theta, double h = 1e-5);

// ||a - b|| / max(1e-8, ||a|| + ||b||).
double relative_error(const Tensor& a, const Tensor& b);

}  // namespace covmeta
