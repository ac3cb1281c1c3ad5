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

// Meta-learners over the task network.
//
// The covariate-aware learner ("ours") encodes a task's support covariates
// into a Gaussian posterior over a task embedding z, initializes the task
// network from z through per-unit sigmoid gates on a shared base network, and
// adapts it with K plain SGD steps on the support set. The outer objective
// per task is
//
//   total = a_l2 * ||beta||^2 + a_R * recon + a_KL * kl + query_nll
//
// where recon = -sum_j log p(x_j | z^Q) and kl = KL(q(z^Q) || N(0, I)) use a
// separate encoding (and latent draw) of the ELBO covariates, by default the
// query covariates, and query_nll is the query loss of the adapted network.
//
// MAML shares one initialization across tasks and differentiates through the
// inner loop; Reptile moves the initialization towards the adapted weights.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "covmeta/nets.h"
#include "covmeta/optim.h"
#include "covmeta/taskgen.h"

namespace covmeta {

enum class GradMode { kExact, kFirstOrder };
enum class ElboCovariates { kQuery, kSupport, kBoth };

std::string to_string(GradMode m);
std::string to_string(ElboCovariates e);
GradMode parse_grad_mode(const std::string& s);
ElboCovariates parse_elbo_covariates(const std::string& s);

struct LossWeights {
  double recon = 0.2;
  double kl = 0.1;
  double l2 = 0.0005;
};

struct MetaConfig {
  std::size_t inner_steps = 5;
  double inner_lr = 0.01;
  GradMode mode = GradMode::kExact;
  LossWeights weights;
  ElboCovariates elbo_covariates = ElboCovariates::kQuery;
  EncoderInput encoder_input = EncoderInput::kCovariates;
  // lambda_0 = base network; the support encoding is skipped.
  bool freeze_gates = false;
};

// One task's diagnostics. total = l2_weight * l2 + recon_weight * recon +
// kl_weight * kl + task_nll.
struct LossBreakdown {
  double recon = 0.0;
  double kl = 0.0;
  double task_nll = 0.0;
  double l2 = 0.0;
  double total = 0.0;
};

template <class T>
struct AdaptResult {
  MlpParams<T> lambda_init;
  MlpParams<T> lambda_final;
  // Support loss before each step and after the last one (K + 1 values).
  std::vector<double> support_losses;
  T z;
  Tensor eps;
};

// 1/2 sum_j (y_j - f(x_j; lambda))^2.
template <class T>
T task_nll(const MlpParams<T>& lambda, const std::vector<double>& xs, const std::vector<double>& ys);

// K SGD steps on the support loss from `init`, recorded on init's tape. In
// exact mode the tape must be higher-order and every step stays
// differentiable; in first-order mode each inner gradient is a constant.
MlpParams<Var> inner_loop(const MlpParams<Var>& init, const std::vector<double>& xs, const std::vector<double>& ys,
                          std::size_t steps, double lr, GradMode mode, std::vector<double>* losses = nullptr);

// Same updates without an outer tape.
MlpParams<Tensor> inner_loop_eager(const MlpParams<Tensor>& init, const std::vector<double>& xs,
                                   const std::vector<double>& ys, std::size_t steps, double lr,
                                   std::vector<double>* losses = nullptr);

// Encode the support set, draw z with `eps`, initialize and adapt.
AdaptResult<Var> adapt(const MetaParams<Var>& beta, const std::vector<double>& xs, const std::vector<double>& ys,
                       const Tensor& eps, const MetaConfig& cfg);

// Inference-only counterpart of adapt(); returns lambda* (bit-identical to
// adapt(...).lambda_final). `init_out`, if given, receives lambda_0.
MlpParams<Tensor> meta_test_adapt(const MetaParams<Tensor>& beta, const std::vector<double>& xs,
                                  const std::vector<double>& ys, const Tensor& eps, const MetaConfig& cfg,
                                  MlpParams<Tensor>* init_out = nullptr);

struct OuterTerms {
  Var total;
  LossBreakdown values;
};

// Per-task objective on beta's tape. When include_l2 is false the l2 field
// is left at zero and the caller adds the weight decay.
OuterTerms outer_objective(const MetaParams<Var>& beta, const Task& task, const Tensor& eps_support,
                           const Tensor& eps_query, const MetaConfig& cfg, bool include_l2 = true);

// MAML per-task objective: query loss after adapting theta0, plus l2.
OuterTerms maml_objective(const MlpParams<Var>& theta0, const Task& task, const MetaConfig& cfg,
                          bool include_l2 = true);

// Standard-normal draws for one task's support and query latents.
struct TaskNoise {
  Tensor eps_support;
  Tensor eps_query;
};
TaskNoise draw_task_noise(Rng& rng, std::size_t latent);

struct BatchGradient {
  Tensor grad;  // flattened, layout order
  LossBreakdown mean;
};

// Gradient of the batch-mean objective (including weight decay) w.r.t. the
// flattened meta-parameters.
BatchGradient meta_batch_gradient(const MetaParams<Tensor>& beta, const std::vector<const Task*>& batch,
                                  const std::vector<TaskNoise>& noise, const MetaConfig& cfg);
BatchGradient maml_batch_gradient(const MlpParams<Tensor>& theta0, const std::vector<const Task*>& batch,
                                  const MetaConfig& cfg);

// Value of the batch-mean objective (for finite-difference checks).
double meta_batch_objective(const MetaParams<Tensor>& beta, const std::vector<const Task*>& batch,
                            const std::vector<TaskNoise>& noise, const MetaConfig& cfg);
double maml_batch_objective(const MlpParams<Tensor>& theta0, const std::vector<const Task*>& batch,
                            const MetaConfig& cfg);

template <class P>
struct StepResult {
  P params;
  AdamState adam;
  LossBreakdown mean;
};

// One Adam step on the batch-mean objective. `rng` supplies the latent noise.
StepResult<MetaParams<Tensor>> meta_train_step(const MetaParams<Tensor>& beta, const AdamState& adam,
                                               const std::vector<const Task*>& batch, Rng& rng,
                                               const MetaConfig& cfg);
StepResult<MlpParams<Tensor>> maml_train_step(const MlpParams<Tensor>& theta0, const AdamState& adam,
                                              const std::vector<const Task*>& batch, const MetaConfig& cfg);

// theta0 + step * mean_i(lambda*_i - theta0).
MlpParams<Tensor> reptile_train_step(const MlpParams<Tensor>& theta0, const std::vector<const Task*>& batch,
                                     const MetaConfig& cfg, double outer_step, LossBreakdown* mean = nullptr);

// Squared-error mean of the task network against noiseless targets.
double prediction_mse(const MlpParams<Tensor>& lambda, const std::vector<double>& xs, const Hypothesis& h);

}  // namespace covmeta
