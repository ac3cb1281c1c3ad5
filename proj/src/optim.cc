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

#include "covmeta/optim.h"

#include <cmath>

namespace covmeta {

AdamState AdamState::for_params(const Tensor& params, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  s.first_moment = Tensor::zeros_like(params);
  s.second_moment = Tensor::zeros_like(params);
  return s;
}

AdamResult adam_step(const AdamState& state, const Tensor& params, const Tensor& grads) {
  if (params.shape() != grads.shape() || state.first_moment.shape() != params.shape() ||
      state.second_moment.shape() != params.shape()) {
    throw ShapeError("adam_step: params " + shape_str(params.shape()) + ", grads " + shape_str(grads.shape()) +
                     " and moments " + shape_str(state.first_moment.shape()) + " must agree");
  }
  AdamResult r{state, params};
  AdamState& s = r.state;
  s.step += 1;
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    s.first_moment[i] = s.beta1 * s.first_moment[i] + (1.0 - s.beta1) * g;
    s.second_moment[i] = s.beta2 * s.second_moment[i] + (1.0 - s.beta2) * g * g;
    const double m_hat = s.first_moment[i] / c1;
    const double v_hat = s.second_moment[i] / c2;
    r.params[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
  check_finite(r.params, "adam_step");
  return r;
}

Tensor weight_decay_grad(const Tensor& params, double coefficient) {
  if (coefficient < 0.0) throw std::invalid_argument("weight_decay_grad: coefficient must be non-negative");
  return kernels::scale(params, 2.0 * coefficient);
}

}  // namespace covmeta
