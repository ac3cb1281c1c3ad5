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

#include "covmeta/meta.h"

#include <cmath>
#include <stdexcept>

#include "covmeta/densities.h"

namespace covmeta {

std::string to_string(GradMode m) { return m == GradMode::kExact ? "exact" : "first-order"; }

std::string to_string(ElboCovariates e) {
  switch (e) {
    case ElboCovariates::kQuery: return "query";
    case ElboCovariates::kSupport: return "support";
    case ElboCovariates::kBoth: return "both";
  }
  throw std::invalid_argument("unknown elbo covariates");
}

GradMode parse_grad_mode(const std::string& s) {
  if (s == "exact") return GradMode::kExact;
  if (s == "first-order") return GradMode::kFirstOrder;
  throw std::invalid_argument("unknown gradient mode '" + s + "' (expected exact or first-order)");
}

ElboCovariates parse_elbo_covariates(const std::string& s) {
  for (ElboCovariates e : {ElboCovariates::kQuery, ElboCovariates::kSupport, ElboCovariates::kBoth}) {
    if (to_string(e) == s) return e;
  }
  throw std::invalid_argument("unknown elbo covariates '" + s + "' (expected query, support or both)");
}

namespace {

Tensor column(const std::vector<double>& v) { return Tensor({v.size(), 1}, v); }

void require_task_data(const std::vector<double>& xs, const std::vector<double>& ys, const char* what) {
  if (xs.empty()) throw std::invalid_argument(std::string(what) + ": empty set");
  if (xs.size() != ys.size()) throw std::invalid_argument(std::string(what) + ": covariate/response count mismatch");
}

// Applies one SGD step field by field; `grads` is in layout order.
template <class T, class G>
MlpParams<T> sgd_update(const MlpParams<T>& lambda, const std::vector<G>& grads, double lr) {
  const SgdConfig sgd{lr};
  std::size_t k = 0;
  return lambda.template map<T>([&](const T& p) {
    const T g = constant_like(p, grads[k++]);
    return sgd_step(p, g, sgd);
  });
}

template <>
MlpParams<Var> sgd_update(const MlpParams<Var>& lambda, const std::vector<Var>& grads, double lr) {
  const SgdConfig sgd{lr};
  std::size_t k = 0;
  return lambda.template map<Var>([&](const Var& p) { return sgd_step(p, grads[k++], sgd); });
}

struct ElboSet {
  std::vector<double> xs;
  std::vector<double> ys;
};

ElboSet elbo_set(const Task& task, ElboCovariates which) {
  ElboSet s;
  if (which != ElboCovariates::kQuery) {
    s.xs = task.support_x;
    s.ys = task.support_y;
  }
  if (which != ElboCovariates::kSupport) {
    s.xs.insert(s.xs.end(), task.query_x.begin(), task.query_x.end());
    s.ys.insert(s.ys.end(), task.query_y.begin(), task.query_y.end());
  }
  return s;
}

template <class P>
Var l2_term(const P& params) {
  Var acc;
  params.visit([&](const std::string&, const Var& v) {
    const Var s = sum(square(v));
    acc = acc.valid() ? add(acc, s) : s;
  });
  return acc;
}

void accumulate(std::vector<double>& acc, const std::vector<Tensor>& grads) {
  std::size_t offset = 0;
  for (const Tensor& g : grads) {
    for (double v : g.data()) acc[offset++] += v;
  }
  if (offset != acc.size()) throw ShapeError("gradient size does not match the parameter layout");
}

void add_into(LossBreakdown& acc, const LossBreakdown& v) {
  acc.recon += v.recon;
  acc.kl += v.kl;
  acc.task_nll += v.task_nll;
  acc.l2 += v.l2;
  acc.total += v.total;
}

LossBreakdown scaled(LossBreakdown v, double c) {
  v.recon *= c;
  v.kl *= c;
  v.task_nll *= c;
  v.l2 *= c;
  v.total *= c;
  return v;
}

void require_batch(std::size_t n, const char* what) {
  if (n == 0) throw std::invalid_argument(std::string(what) + ": empty batch");
}

// Batch mean of per-task gradients, plus the weight decay of the flattened
// parameters. `task_grad` returns (gradients in layout order, breakdown).
template <class P, class F>
BatchGradient batch_gradient(const P& params, std::size_t batch_size, const LossWeights& w, F&& task_grad) {
  const Tensor flat = flatten(params);
  std::vector<double> acc(flat.size(), 0.0);
  LossBreakdown mean;
  for (std::size_t i = 0; i < batch_size; ++i) {
    auto [grads, values] = task_grad(i);
    accumulate(acc, grads);
    add_into(mean, values);
  }
  const double inv = 1.0 / static_cast<double>(batch_size);
  Tensor grad = kernels::scale(Tensor::vector(std::move(acc)), inv);
  grad = kernels::add(grad, weight_decay_grad(flat, w.l2));
  check_finite(grad, "meta gradient");
  mean = scaled(mean, inv);
  mean.l2 = squared_norm(params);
  mean.total = w.l2 * mean.l2 + w.recon * mean.recon + w.kl * mean.kl + mean.task_nll;
  return {std::move(grad), mean};
}

}  // namespace

template <class T>
T task_nll(const MlpParams<T>& lambda, const std::vector<double>& xs, const std::vector<double>& ys) {
  using O = Ops<T>;
  require_task_data(xs, ys, "task_nll");
  const T x = constant_like(lambda.bias_transform, column(xs));
  const T y = constant_like(lambda.bias_transform, column(ys));
  const T resid = O::sub(mlp_forward(lambda, x), y);
  return O::scale(O::sum(O::square(resid)), 0.5);
}

template Tensor task_nll(const MlpParams<Tensor>&, const std::vector<double>&, const std::vector<double>&);
template Var task_nll(const MlpParams<Var>&, const std::vector<double>&, const std::vector<double>&);

MlpParams<Var> inner_loop(const MlpParams<Var>& init, const std::vector<double>& xs, const std::vector<double>& ys,
                          std::size_t steps, double lr, GradMode mode, std::vector<double>* losses) {
  Tape& tape = init.bias_transform.tape();
  if (mode == GradMode::kExact && steps > 0 && !tape.higher_order()) {
    throw std::logic_error("inner_loop: exact mode needs a higher-order tape");
  }
  MlpParams<Var> lambda = init;
  for (std::size_t t = 0; t < steps; ++t) {
    const Var loss = task_nll(lambda, xs, ys);
    if (losses) losses->push_back(loss.value().item());
    const std::vector<Var> vars = collect_vars(lambda);
    if (mode == GradMode::kExact) {
      lambda = sgd_update(lambda, tape.grad_nodes(loss, vars), lr);
    } else {
      lambda = sgd_update(lambda, tape.grad(loss, vars), lr);
    }
  }
  if (losses) losses->push_back(task_nll(lambda, xs, ys).value().item());
  return lambda;
}

MlpParams<Tensor> inner_loop_eager(const MlpParams<Tensor>& init, const std::vector<double>& xs,
                                   const std::vector<double>& ys, std::size_t steps, double lr,
                                   std::vector<double>* losses) {
  MlpParams<Tensor> lambda = init;
  for (std::size_t t = 0; t < steps; ++t) {
    Tape tape;
    const MlpParams<Var> leaves = to_leaves(lambda, tape);
    const Var loss = task_nll(leaves, xs, ys);
    if (losses) losses->push_back(loss.value().item());
    lambda = sgd_update(lambda, tape.grad(loss, collect_vars(leaves)), lr);
  }
  if (losses) losses->push_back(task_nll(lambda, xs, ys).item());
  return lambda;
}

AdaptResult<Var> adapt(const MetaParams<Var>& beta, const std::vector<double>& xs, const std::vector<double>& ys,
                       const Tensor& eps, const MetaConfig& cfg) {
  require_task_data(xs, ys, "adapt");
  AdaptResult<Var> r;
  r.eps = eps;
  if (cfg.freeze_gates) {
    r.lambda_init = beta.initializer.base;
  } else {
    const Kappa<Var> kappa = encode_covariates(beta.encoder, encoder_rows(cfg.encoder_input, xs, ys));
    r.z = reparameterize(kappa, eps);
    r.lambda_init = init_from_latent(beta.initializer, r.z);
  }
  r.lambda_final = inner_loop(r.lambda_init, xs, ys, cfg.inner_steps, cfg.inner_lr, cfg.mode, &r.support_losses);
  return r;
}

MlpParams<Tensor> meta_test_adapt(const MetaParams<Tensor>& beta, const std::vector<double>& xs,
                                  const std::vector<double>& ys, const Tensor& eps, const MetaConfig& cfg,
                                  MlpParams<Tensor>* init_out) {
  require_task_data(xs, ys, "meta_test_adapt");
  MlpParams<Tensor> init;
  if (cfg.freeze_gates) {
    init = beta.initializer.base;
  } else {
    const Kappa<Tensor> kappa = encode_covariates(beta.encoder, encoder_rows(cfg.encoder_input, xs, ys));
    init = init_from_latent(beta.initializer, reparameterize(kappa, eps));
  }
  if (init_out) *init_out = init;
  return inner_loop_eager(init, xs, ys, cfg.inner_steps, cfg.inner_lr);
}

OuterTerms outer_objective(const MetaParams<Var>& beta, const Task& task, const Tensor& eps_support,
                           const Tensor& eps_query, const MetaConfig& cfg, bool include_l2) {
  const AdaptResult<Var> adapted = adapt(beta, task.support_x, task.support_y, eps_support, cfg);
  OuterTerms out;
  out.total = task_nll(adapted.lambda_final, task.query_x, task.query_y);
  out.values.task_nll = out.total.value().item();

  const LossWeights& w = cfg.weights;
  if (w.recon > 0.0 || w.kl > 0.0) {
    const ElboSet set = elbo_set(task, cfg.elbo_covariates);
    const Kappa<Var> kappa = encode_covariates(beta.encoder, encoder_rows(cfg.encoder_input, set.xs, set.ys));
    if (w.recon > 0.0) {
      const Var z = reparameterize(kappa, eps_query);
      const Var recon = neg(decode_covariate_loglik(beta.decoder, z, set.xs));
      out.values.recon = recon.value().item();
      out.total = add(out.total, scale(recon, w.recon));
    }
    if (w.kl > 0.0) {
      const Var kl = gaussian_kl_to_standard(kappa.mu, kappa.sigma);
      out.values.kl = kl.value().item();
      out.total = add(out.total, scale(kl, w.kl));
    }
  }
  if (include_l2 && w.l2 > 0.0) {
    const Var l2 = l2_term(beta);
    out.values.l2 = l2.value().item();
    out.total = add(out.total, scale(l2, w.l2));
  }
  out.values.total = out.total.value().item();
  return out;
}

OuterTerms maml_objective(const MlpParams<Var>& theta0, const Task& task, const MetaConfig& cfg, bool include_l2) {
  const MlpParams<Var> lambda =
      inner_loop(theta0, task.support_x, task.support_y, cfg.inner_steps, cfg.inner_lr, cfg.mode);
  OuterTerms out;
  out.total = task_nll(lambda, task.query_x, task.query_y);
  out.values.task_nll = out.total.value().item();
  if (include_l2 && cfg.weights.l2 > 0.0) {
    const Var l2 = l2_term(theta0);
    out.values.l2 = l2.value().item();
    out.total = add(out.total, scale(l2, cfg.weights.l2));
  }
  out.values.total = out.total.value().item();
  return out;
}

TaskNoise draw_task_noise(Rng& rng, std::size_t latent) {
  TaskNoise n{Tensor({latent}), Tensor({latent})};
  for (double& v : n.eps_support.data()) v = rng.normal();
  for (double& v : n.eps_query.data()) v = rng.normal();
  return n;
}

BatchGradient meta_batch_gradient(const MetaParams<Tensor>& beta, const std::vector<const Task*>& batch,
                                  const std::vector<TaskNoise>& noise, const MetaConfig& cfg) {
  require_batch(batch.size(), "meta_batch_gradient");
  if (noise.size() != batch.size()) throw std::invalid_argument("meta_batch_gradient: one noise draw per task");
  return batch_gradient(beta, batch.size(), cfg.weights, [&](std::size_t i) {
    Tape tape(cfg.mode == GradMode::kExact);
    const MetaParams<Var> leaves = to_leaves(beta, tape);
    const OuterTerms terms =
        outer_objective(leaves, *batch[i], noise[i].eps_support, noise[i].eps_query, cfg, /*include_l2=*/false);
    return std::make_pair(tape.grad(terms.total, collect_vars(leaves)), terms.values);
  });
}

BatchGradient maml_batch_gradient(const MlpParams<Tensor>& theta0, const std::vector<const Task*>& batch,
                                  const MetaConfig& cfg) {
  require_batch(batch.size(), "maml_batch_gradient");
  return batch_gradient(theta0, batch.size(), cfg.weights, [&](std::size_t i) {
    Tape tape(cfg.mode == GradMode::kExact);
    const MlpParams<Var> leaves = to_leaves(theta0, tape);
    const OuterTerms terms = maml_objective(leaves, *batch[i], cfg, /*include_l2=*/false);
    return std::make_pair(tape.grad(terms.total, collect_vars(leaves)), terms.values);
  });
}

double meta_batch_objective(const MetaParams<Tensor>& beta, const std::vector<const Task*>& batch,
                            const std::vector<TaskNoise>& noise, const MetaConfig& cfg) {
  require_batch(batch.size(), "meta_batch_objective");
  if (noise.size() != batch.size()) throw std::invalid_argument("meta_batch_objective: one noise draw per task");
  double acc = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Tape tape(cfg.mode == GradMode::kExact);
    const MetaParams<Var> vars = to_constants(beta, tape);
    acc += outer_objective(vars, *batch[i], noise[i].eps_support, noise[i].eps_query, cfg, false).values.total;
  }
  return acc / static_cast<double>(batch.size()) + cfg.weights.l2 * squared_norm(beta);
}

double maml_batch_objective(const MlpParams<Tensor>& theta0, const std::vector<const Task*>& batch,
                            const MetaConfig& cfg) {
  require_batch(batch.size(), "maml_batch_objective");
  double acc = 0.0;
  for (const Task* task : batch) {
    Tape tape(cfg.mode == GradMode::kExact);
    acc += maml_objective(to_constants(theta0, tape), *task, cfg, false).values.total;
  }
  return acc / static_cast<double>(batch.size()) + cfg.weights.l2 * squared_norm(theta0);
}

namespace {

template <class P>
StepResult<P> apply_adam(const P& params, const AdamState& adam, const BatchGradient& g) {
  AdamResult r = adam_step(adam, flatten(params), g.grad);
  StepResult<P> out{params, std::move(r.state), g.mean};
  unflatten(out.params, r.params);
  return out;
}

}  // namespace

StepResult<MetaParams<Tensor>> meta_train_step(const MetaParams<Tensor>& beta, const AdamState& adam,
                                               const std::vector<const Task*>& batch, Rng& rng,
                                               const MetaConfig& cfg) {
  const std::size_t latent = beta.encoder.w_hh.dim(0);
  std::vector<TaskNoise> noise;
  noise.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) noise.push_back(draw_task_noise(rng, latent));
  return apply_adam(beta, adam, meta_batch_gradient(beta, batch, noise, cfg));
}

StepResult<MlpParams<Tensor>> maml_train_step(const MlpParams<Tensor>& theta0, const AdamState& adam,
                                              const std::vector<const Task*>& batch, const MetaConfig& cfg) {
  return apply_adam(theta0, adam, maml_batch_gradient(theta0, batch, cfg));
}

MlpParams<Tensor> reptile_train_step(const MlpParams<Tensor>& theta0, const std::vector<const Task*>& batch,
                                     const MetaConfig& cfg, double outer_step, LossBreakdown* mean) {
  require_batch(batch.size(), "reptile_train_step");
  const Tensor flat0 = flatten(theta0);
  std::vector<double> acc(flat0.size(), 0.0);
  LossBreakdown sum_values;
  for (const Task* task : batch) {
    const MlpParams<Tensor> lambda =
        inner_loop_eager(theta0, task->support_x, task->support_y, cfg.inner_steps, cfg.inner_lr);
    const Tensor delta = kernels::sub(flatten(lambda), flat0);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += delta[k];
    if (mean) sum_values.task_nll += task_nll(lambda, task->query_x, task->query_y).item();
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  const Tensor step = kernels::scale(Tensor::vector(std::move(acc)), outer_step * inv);
  check_finite(step, "reptile update");
  MlpParams<Tensor> out = theta0;
  unflatten(out, kernels::add(flat0, step));
  if (mean) {
    *mean = LossBreakdown{};
    mean->task_nll = sum_values.task_nll * inv;
    mean->total = mean->task_nll;
  }
  return out;
}

double prediction_mse(const MlpParams<Tensor>& lambda, const std::vector<double>& xs, const Hypothesis& h) {
  if (xs.empty()) throw std::invalid_argument("prediction_mse: no covariates");
  const Tensor pred = mlp_forward(lambda, column(xs));
  double acc = 0.0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double d = pred[j] - eval_hypothesis(h, xs[j]);
    acc += d * d;
  }
  return acc / static_cast<double>(xs.size());
}

}  // namespace covmeta
