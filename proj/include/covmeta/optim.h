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

#include <cstdint>

#include "covmeta/autodiff.h"

namespace covmeta {

struct SgdConfig {
  double learning_rate = 0.01;
};

// params - lr * grads. Templated so the inner loop can run on a tape (the
// update stays differentiable w.r.t. the pre-update params) or eagerly.
template <class T>
T sgd_step(const T& params, const T& grads, const SgdConfig& cfg) {
  if (Ops<T>::shape(params) != Ops<T>::shape(grads)) {
    throw ShapeError("sgd_step: params " + shape_str(Ops<T>::shape(params)) + " vs grads " +
                     shape_str(Ops<T>::shape(grads)));
  }
  return Ops<T>::sub(params, Ops<T>::scale(grads, cfg.learning_rate));
}

struct AdamState {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  Tensor first_moment;
  Tensor second_moment;

  // Zeroed accumulators shaped like `params`.
  static AdamState for_params(const Tensor& params, double learning_rate = 0.001);
};

struct AdamResult {
  AdamState state;
  Tensor params;
};

// One bias-corrected Adam update. Pure: the inputs are not modified.
AdamResult adam_step(const AdamState& state, const Tensor& params, const Tensor& grads);

// Gradient of coefficient * ||params||^2.
Tensor weight_decay_grad(const Tensor& params, double coefficient);

}  // namespace covmeta
