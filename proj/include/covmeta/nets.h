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

// Parametric components of the meta-learner.
//
// Every parameter group is a struct templated on its value type: Tensor for
// storage and eager inference, Var for recording on a tape. `visit` walks the
// fields in the canonical flattened layout; `map` rebuilds the struct with a
// different value type.
//
// Flattened layout (checkpoint contract). Matrices are row-major and stored
// as (fan_in, fan_out), so column j holds the weights of output unit j.
//
//   MlpParams          bias_transform, then per layer l: weight[l], bias[l]
//   EncoderParams      w_in, w_hh, b_h, w_mu, b_mu, w_logvar, b_logvar
//   DecoderParams      w_hidden, b_hidden, w_out, b_out
//   InitializerParams  base (MlpParams), then per layer l: gate_w[l], gate_b[l]
//   MetaParams         encoder, decoder, initializer

#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "covmeta/autodiff.h"
#include "covmeta/rng.h"

namespace covmeta {

enum class EncoderInput { kCovariates, kPairs };

struct Architecture {
  std::vector<std::size_t> hidden = {100, 100, 100};
  std::size_t bias_transform = 20;
  // RNN hidden size; also the latent (task embedding) dimension.
  std::size_t latent = 28;
  std::size_t decoder_hidden = 32;
  EncoderInput encoder_input = EncoderInput::kCovariates;

  std::size_t input_dim() const { return 1 + bias_transform; }
  std::size_t encoder_input_dim() const { return encoder_input == EncoderInput::kPairs ? 2 : 1; }
  // Layer widths from input to the scalar output.
  std::vector<std::size_t> layer_widths() const;
  void validate() const;

  bool operator==(const Architecture&) const = default;
};

template <class T>
struct MlpParams {
  T bias_transform;
  std::vector<T> weights;
  std::vector<T> biases;

  std::size_t num_layers() const { return weights.size(); }

  template <class F>
  void visit(F&& f) const {
    f(std::string("bias_transform"), bias_transform);
    for (std::size_t l = 0; l < weights.size(); ++l) {
      f("weight" + std::to_string(l), weights[l]);
      f("bias" + std::to_string(l), biases[l]);
    }
  }
  template <class F>
  void visit(F&& f) {
    f(std::string("bias_transform"), bias_transform);
    for (std::size_t l = 0; l < weights.size(); ++l) {
      f("weight" + std::to_string(l), weights[l]);
      f("bias" + std::to_string(l), biases[l]);
    }
  }
  template <class U, class F>
  MlpParams<U> map(F&& f) const {
    MlpParams<U> out;
    out.bias_transform = f(bias_transform);
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.weights.push_back(f(weights[l]));
      out.biases.push_back(f(biases[l]));
    }
    return out;
  }
};

template <class T>
struct EncoderParams {
  T w_in, w_hh, b_h;
  T w_mu, b_mu;
  T w_logvar, b_logvar;

  template <class Self, class F>
  static void visit_impl(Self& s, F&& f) {
    f(std::string("w_in"), s.w_in);
    f(std::string("w_hh"), s.w_hh);
    f(std::string("b_h"), s.b_h);
    f(std::string("w_mu"), s.w_mu);
    f(std::string("b_mu"), s.b_mu);
    f(std::string("w_logvar"), s.w_logvar);
    f(std::string("b_logvar"), s.b_logvar);
  }
  template <class F>
  void visit(F&& f) const { visit_impl(*this, f); }
  template <class F>
  void visit(F&& f) { visit_impl(*this, f); }
  template <class U, class F>
  EncoderParams<U> map(F&& f) const {
    return {f(w_in), f(w_hh), f(b_h), f(w_mu), f(b_mu), f(w_logvar), f(b_logvar)};
  }
};

template <class T>
struct DecoderParams {
  T w_hidden, b_hidden;
  T w_out, b_out;

  template <class Self, class F>
  static void visit_impl(Self& s, F&& f) {
    f(std::string("w_hidden"), s.w_hidden);
    f(std::string("b_hidden"), s.b_hidden);
    f(std::string("w_out"), s.w_out);
    f(std::string("b_out"), s.b_out);
  }
  template <class F>
  void visit(F&& f) const { visit_impl(*this, f); }
  template <class F>
  void visit(F&& f) { visit_impl(*this, f); }
  template <class U, class F>
  DecoderParams<U> map(F&& f) const {
    return {f(w_hidden), f(b_hidden), f(w_out), f(b_out)};
  }
};

template <class T>
struct InitializerParams {
  MlpParams<T> base;
  std::vector<T> gate_w;
  std::vector<T> gate_b;

  template <class Self, class F>
  static void visit_impl(Self& s, F&& f) {
    s.base.visit([&](const std::string& name, auto& v) { f("base." + name, v); });
    for (std::size_t l = 0; l < s.gate_w.size(); ++l) {
      f("gate_w" + std::to_string(l), s.gate_w[l]);
      f("gate_b" + std::to_string(l), s.gate_b[l]);
    }
  }
  template <class F>
  void visit(F&& f) const { visit_impl(*this, f); }
  template <class F>
  void visit(F&& f) { visit_impl(*this, f); }
  template <class U, class F>
  InitializerParams<U> map(F&& f) const {
    InitializerParams<U> out;
    out.base = base.template map<U>(f);
    for (std::size_t l = 0; l < gate_w.size(); ++l) {
      out.gate_w.push_back(f(gate_w[l]));
      out.gate_b.push_back(f(gate_b[l]));
    }
    return out;
  }
};

template <class T>
struct MetaParams {
  EncoderParams<T> encoder;
  DecoderParams<T> decoder;
  InitializerParams<T> initializer;

  template <class Self, class F>
  static void visit_impl(Self& s, F&& f) {
    s.encoder.visit([&](const std::string& name, auto& v) { f("encoder." + name, v); });
    s.decoder.visit([&](const std::string& name, auto& v) { f("decoder." + name, v); });
    s.initializer.visit([&](const std::string& name, auto& v) { f("initializer." + name, v); });
  }
  template <class F>
  void visit(F&& f) const { visit_impl(*this, f); }
  template <class F>
  void visit(F&& f) { visit_impl(*this, f); }
  template <class U, class F>
  MetaParams<U> map(F&& f) const {
    return {encoder.template map<U>(f), decoder.template map<U>(f), initializer.template map<U>(f)};
  }
};

// Name and shape of each field, in layout order.
struct LayoutEntry {
  std::string name;
  Shape shape;
  bool operator==(const LayoutEntry&) const = default;
};
using Layout = std::vector<LayoutEntry>;

template <class P>
Layout layout_of(const P& params) {
  Layout out;
  params.visit([&](const std::string& name, const Tensor& t) { out.push_back({name, t.shape()}); });
  return out;
}

std::size_t layout_size(const Layout& layout);

template <class P>
Tensor flatten(const P& params) {
  std::vector<double> flat;
  params.visit([&](const std::string&, const Tensor& t) { flat.insert(flat.end(), t.data().begin(), t.data().end()); });
  return Tensor::vector(std::move(flat));
}

template <class P>
void unflatten(P& params, const Tensor& flat) {
  std::size_t offset = 0;
  params.visit([&](const std::string& name, Tensor& t) {
    if (offset + t.size() > flat.size()) throw ShapeError("unflatten: vector too short at " + name);
    std::copy_n(flat.data().begin() + static_cast<std::ptrdiff_t>(offset), t.size(), t.data().begin());
    offset += t.size();
  });
  if (offset != flat.size()) throw ShapeError("unflatten: vector has " + std::to_string(flat.size() - offset) + " extra values");
}

// Leaves (requires_grad) on `tape` for every field.
template <class P>
auto to_leaves(const P& params, Tape& tape) {
  return params.template map<Var>([&](const Tensor& t) { return tape.leaf(t); });
}

template <class P>
auto to_constants(const P& params, Tape& tape) {
  return params.template map<Var>([&](const Tensor& t) { return tape.constant(t); });
}

// Vars of a Var-valued parameter struct, in layout order.
template <class P>
std::vector<Var> collect_vars(const P& params) {
  std::vector<Var> out;
  params.visit([&](const std::string&, const Var& v) { out.push_back(v); });
  return out;
}

template <class P>
double squared_norm(const P& params) {
  double s = 0.0;
  params.visit([&](const std::string&, const Tensor& t) { s += kernels::squared_norm(t); });
  return s;
}

// Variational posterior over the task embedding.
template <class T>
struct Kappa {
  T mu;
  T sigma;
};

// Task network. x is (batch, 1); returns (batch, 1). ReLU hidden layers,
// linear output; the bias transformation is appended to every input row.
template <class T>
T mlp_forward(const MlpParams<T>& params, const T& x);

// Recurrent encoder over a set of observations. `rows` holds one
// observation per entry (covariate, or covariate and response); they are
// sorted ascending before the scan so the encoding is order invariant.
template <class T>
Kappa<T> encode_covariates(const EncoderParams<T>& enc, std::vector<std::vector<double>> rows);

// z = mu + eps * sigma.
template <class T>
T reparameterize(const Kappa<T>& kappa, const Tensor& eps);

// sum_j log N(x_j | mu_dec(z), sigma_dec(z)^2).
template <class T>
T decode_covariate_loglik(const DecoderParams<T>& dec, const T& z, const std::vector<double>& xs);

// Decoder head output (mu_dec, sigma_dec) for inspection.
template <class T>
std::pair<T, T> decode_covariate_params(const DecoderParams<T>& dec, const T& z);

// Gated copy of the base network: row block of output unit i of layer l and
// bias i of layer l are scaled by sigmoid(U_l z + c_l)[i].
template <class T>
MlpParams<T> init_from_latent(const InitializerParams<T>& init, const T& z);

// Glorot-uniform weights, zero biases and bias transformation.
MetaParams<Tensor> init_meta_params(Rng& rng, const Architecture& arch);
MlpParams<Tensor> init_mlp_params(Rng& rng, const Architecture& arch);

// Constant on the same tape as `like` (or the tensor itself, eagerly).
inline Tensor constant_like(const Tensor&, Tensor value) { return value; }
inline Var constant_like(const Var& like, Tensor value) { return like.tape().constant(std::move(value)); }

// Rows for encode_covariates from the configured encoder input.
std::vector<std::vector<double>> encoder_rows(EncoderInput input, const std::vector<double>& xs,
                                              const std::vector<double>& ys);

}  // namespace covmeta
