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

#include "covmeta/nets.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "covmeta/densities.h"

namespace covmeta {

std::vector<std::size_t> Architecture::layer_widths() const {
  std::vector<std::size_t> w;
  w.push_back(input_dim());
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(1);
  return w;
}

void Architecture::validate() const {
  if (hidden.empty()) throw std::invalid_argument("architecture: at least one hidden layer is required");
  for (std::size_t h : hidden) {
    if (h == 0) throw std::invalid_argument("architecture: hidden widths must be positive");
  }
  if (bias_transform == 0) throw std::invalid_argument("architecture: bias_transform must be positive");
  if (latent == 0) throw std::invalid_argument("architecture: latent must be positive");
  if (decoder_hidden == 0) throw std::invalid_argument("architecture: decoder_hidden must be positive");
}

std::size_t layout_size(const Layout& layout) {
  std::size_t n = 0;
  for (const auto& e : layout) n += shape_size(e.shape);
  return n;
}

template <class T>
T mlp_forward(const MlpParams<T>& params, const T& x) {
  using O = Ops<T>;
  const Shape& xs = O::shape(x);
  if (xs.size() != 2 || xs[1] != 1) throw ShapeError("mlp_forward: x must be (batch, 1), got " + shape_str(xs));
  const std::size_t batch = xs[0];
  const std::size_t bt = O::shape(params.bias_transform)[0];
  T h = O::concat(x, O::broadcast_to(params.bias_transform, {batch, bt}), 1);
  const std::size_t layers = params.num_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    h = O::add(O::matmul(h, params.weights[l]), params.biases[l]);
    if (l + 1 < layers) h = O::relu(h);
  }
  return h;
}

std::vector<std::vector<double>> encoder_rows(EncoderInput input, const std::vector<double>& xs,
                                              const std::vector<double>& ys) {
  std::vector<std::vector<double>> rows;
  rows.reserve(xs.size());
  for (std::size_t j = 0; j < xs.size(); ++j) {
    if (input == EncoderInput::kPairs) {
      if (ys.size() != xs.size()) throw std::invalid_argument("encoder_rows: pairs input needs one response per covariate");
      rows.push_back({xs[j], ys[j]});
    } else {
      rows.push_back({xs[j]});
    }
  }
  return rows;
}

template <class T>
Kappa<T> encode_covariates(const EncoderParams<T>& enc, std::vector<std::vector<double>> rows) {
  using O = Ops<T>;
  if (rows.empty()) throw std::invalid_argument("encode_covariates: no observations");
  const std::size_t d_in = O::shape(enc.w_in)[0];
  const std::size_t latent = O::shape(enc.w_hh)[0];
  for (const auto& r : rows) {
    if (r.size() != d_in) {
      throw ShapeError("encode_covariates: observation width " + std::to_string(r.size()) + " but encoder expects " +
                       std::to_string(d_in));
    }
  }
  std::sort(rows.begin(), rows.end());

  T h;
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const T input = constant_like(enc.w_in, Tensor({1, d_in}, rows[t]));
    T pre = O::add(O::matmul(input, enc.w_in), enc.b_h);
    // h_0 = 0, so the recurrent term starts at the second step.
    if (t > 0) pre = O::add(pre, O::matmul(h, enc.w_hh));
    h = O::tanh(pre);
  }
  const T mu = O::reshape(O::add(O::matmul(h, enc.w_mu), enc.b_mu), {latent});
  const T logvar = O::reshape(O::add(O::matmul(h, enc.w_logvar), enc.b_logvar), {latent});
  return {mu, O::exp(O::scale(logvar, 0.5))};
}

template <class T>
T reparameterize(const Kappa<T>& kappa, const Tensor& eps) {
  using O = Ops<T>;
  if (eps.shape() != O::shape(kappa.mu)) {
    throw ShapeError("reparameterize: eps " + shape_str(eps.shape()) + " vs mu " + shape_str(O::shape(kappa.mu)));
  }
  return O::add(kappa.mu, O::mul(constant_like(kappa.mu, eps), kappa.sigma));
}

template <class T>
std::pair<T, T> decode_covariate_params(const DecoderParams<T>& dec, const T& z) {
  using O = Ops<T>;
  const std::size_t latent = O::shape(dec.w_hidden)[0];
  const T zr = O::reshape(z, {1, latent});
  const T h = O::relu(O::add(O::matmul(zr, dec.w_hidden), dec.b_hidden));
  const T out = O::add(O::matmul(h, dec.w_out), dec.b_out);
  const T mu = O::reshape(O::slice(out, 1, 0, 1), {1});
  const T sigma = O::exp(O::reshape(O::slice(out, 1, 1, 2), {1}));
  return {mu, sigma};
}

template <class T>
T decode_covariate_loglik(const DecoderParams<T>& dec, const T& z, const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("decode_covariate_loglik: no covariates");
  const auto [mu, sigma] = decode_covariate_params(dec, z);
  return gaussian_log_density(constant_like(z, Tensor::vector(xs)), mu, sigma);
}

template <class T>
MlpParams<T> init_from_latent(const InitializerParams<T>& init, const T& z) {
  using O = Ops<T>;
  const std::size_t latent = O::shape(z)[0];
  const T zr = O::reshape(z, {1, latent});
  MlpParams<T> out;
  out.bias_transform = init.base.bias_transform;
  for (std::size_t l = 0; l < init.base.num_layers(); ++l) {
    const std::size_t units = O::shape(init.gate_b[l])[0];
    const T gate = O::reshape(O::sigmoid(O::add(O::matmul(zr, init.gate_w[l]), init.gate_b[l])), {units});
    out.weights.push_back(O::mul(init.base.weights[l], gate));
    out.biases.push_back(O::mul(init.base.biases[l], gate));
  }
  return out;
}

namespace {

Tensor glorot(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor w({fan_in, fan_out});
  for (double& v : w.data()) v = rng.uniform(-limit, limit);
  return w;
}

}  // namespace

MlpParams<Tensor> init_mlp_params(Rng& rng, const Architecture& arch) {
  arch.validate();
  MlpParams<Tensor> p;
  p.bias_transform = Tensor({arch.bias_transform});
  const auto widths = arch.layer_widths();
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    p.weights.push_back(glorot(rng, widths[l], widths[l + 1]));
    p.biases.push_back(Tensor({widths[l + 1]}));
  }
  return p;
}

MetaParams<Tensor> init_meta_params(Rng& rng, const Architecture& arch) {
  arch.validate();
  const std::size_t d = arch.latent;
  MetaParams<Tensor> p;
  p.encoder.w_in = glorot(rng, arch.encoder_input_dim(), d);
  p.encoder.w_hh = glorot(rng, d, d);
  p.encoder.b_h = Tensor({d});
  p.encoder.w_mu = glorot(rng, d, d);
  p.encoder.b_mu = Tensor({d});
  p.encoder.w_logvar = glorot(rng, d, d);
  p.encoder.b_logvar = Tensor({d});
  p.decoder.w_hidden = glorot(rng, d, arch.decoder_hidden);
  p.decoder.b_hidden = Tensor({arch.decoder_hidden});
  p.decoder.w_out = glorot(rng, arch.decoder_hidden, 2);
  p.decoder.b_out = Tensor({2});
  p.initializer.base = init_mlp_params(rng, arch);
  for (const Tensor& b : p.initializer.base.biases) {
    p.initializer.gate_w.push_back(glorot(rng, d, b.size()));
    p.initializer.gate_b.push_back(Tensor({b.size()}));
  }
  return p;
}

template Tensor mlp_forward(const MlpParams<Tensor>&, const Tensor&);
template Var mlp_forward(const MlpParams<Var>&, const Var&);
template Kappa<Tensor> encode_covariates(const EncoderParams<Tensor>&, std::vector<std::vector<double>>);
template Kappa<Var> encode_covariates(const EncoderParams<Var>&, std::vector<std::vector<double>>);
template Tensor reparameterize(const Kappa<Tensor>&, const Tensor&);
template Var reparameterize(const Kappa<Var>&, const Tensor&);
template std::pair<Tensor, Tensor> decode_covariate_params(const DecoderParams<Tensor>&, const Tensor&);
template std::pair<Var, Var> decode_covariate_params(const DecoderParams<Var>&, const Var&);
template Tensor decode_covariate_loglik(const DecoderParams<Tensor>&, const Tensor&, const std::vector<double>&);
template Var decode_covariate_loglik(const DecoderParams<Var>&, const Var&, const std::vector<double>&);
template MlpParams<Tensor> init_from_latent(const InitializerParams<Tensor>&, const Tensor&);
template MlpParams<Var> init_from_latent(const InitializerParams<Var>&, const Var&);

}  // namespace covmeta
