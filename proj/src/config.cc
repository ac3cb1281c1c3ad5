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

#include "covmeta/config.h"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace covmeta {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kOurs: return "ours";
    case Algorithm::kMaml: return "maml";
    case Algorithm::kReptile: return "reptile";
    case Algorithm::kMmamlLite: return "mmaml-lite";
  }
  throw std::invalid_argument("unknown algorithm");
}

Algorithm parse_algorithm(const std::string& s) {
  for (Algorithm a : {Algorithm::kOurs, Algorithm::kMaml, Algorithm::kReptile, Algorithm::kMmamlLite}) {
    if (to_string(a) == s) return a;
  }
  throw ConfigError("unknown algorithm '" + s + "' (expected ours, maml, reptile or mmaml-lite)");
}

std::string to_string(EncoderInput e) { return e == EncoderInput::kPairs ? "pairs" : "covariates"; }

EncoderInput parse_encoder_input(const std::string& s) {
  if (s == "covariates") return EncoderInput::kCovariates;
  if (s == "pairs") return EncoderInput::kPairs;
  throw ConfigError("unknown encoder_input '" + s + "' (expected covariates or pairs)");
}

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("config: " + msg);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

void RunConfig::validate() const {
  require(num_tasks > 0, "num_tasks must be positive");
  require(support_size > 0 && query_size > 0, "support_size and query_size must be positive");
  require(finite_nonneg(noise_sigma), "noise_sigma must be finite and >= 0");
  require(finite_nonneg(inner_lr), "inner_lr must be finite and >= 0");
  require(finite_nonneg(outer_lr), "outer_lr must be finite and >= 0");
  require(finite_nonneg(alpha_recon) && finite_nonneg(alpha_kl) && finite_nonneg(alpha_l2),
          "alpha weights must be finite and >= 0");
  require(batch_size > 0, "batch_size must be positive");
  require(epochs > 0, "epochs must be positive");
  require(std::isfinite(reptile_step), "reptile_step must be finite");
  require(algorithm != Algorithm::kReptile || inner_steps >= 1, "reptile needs inner_steps >= 1");
  require(eval_tasks > 0 && eval_support_size > 0 && eval_query_size > 0, "eval sizes must be positive");
  require(eval_seed != data_seed, "eval_seed must differ from data_seed");
  require(!output_dir.empty(), "output_dir must not be empty");
  try {
    architecture_of(*this).validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

Architecture architecture_of(const RunConfig& cfg) {
  Architecture a;
  a.hidden = cfg.hidden;
  a.bias_transform = cfg.bias_transform;
  a.latent = cfg.latent;
  a.decoder_hidden = cfg.decoder_hidden;
  a.encoder_input = cfg.algorithm == Algorithm::kMmamlLite ? EncoderInput::kPairs : cfg.encoder_input;
  return a;
}

MetaConfig meta_config_of(const RunConfig& cfg) {
  MetaConfig m;
  m.inner_steps = cfg.inner_steps;
  m.inner_lr = cfg.inner_lr;
  m.mode = cfg.mode;
  m.weights = {cfg.alpha_recon, cfg.alpha_kl, cfg.alpha_l2};
  m.elbo_covariates = cfg.elbo_covariates;
  m.encoder_input = cfg.encoder_input;
  m.freeze_gates = cfg.freeze_gates;
  if (cfg.algorithm == Algorithm::kMmamlLite) {
    m.weights.recon = 0.0;
    m.weights.kl = 0.0;
    m.encoder_input = EncoderInput::kPairs;
  }
  return m;
}

std::vector<std::string> preset_names() { return {"default", "mmaml-lite", "workshop", "miniature"}; }

RunConfig preset(const std::string& name) {
  RunConfig c;
  if (name == "default") return c;
  if (name == "mmaml-lite") {
    c.algorithm = Algorithm::kMmamlLite;
    c.alpha_recon = 0.0;
    c.alpha_kl = 0.0;
    c.encoder_input = EncoderInput::kPairs;
    return c;
  }
  if (name == "workshop") {
    c.alpha_kl = 0.01;
    return c;
  }
  if (name == "miniature") {
    c.hidden = {6, 5};
    c.bias_transform = 2;
    c.latent = 3;
    c.decoder_hidden = 4;
    c.inner_steps = 2;
    c.inner_lr = 0.01;
    c.support_size = 3;
    c.query_size = 3;
    c.num_tasks = 2;
    c.batch_size = 2;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

nlohmann::json to_json(const RunConfig& c) {
  return {
      {"algorithm", to_string(c.algorithm)},
      {"variant", to_string(c.variant)},
      {"dependence", to_string(c.dependence)},
      {"data_seed", c.data_seed},
      {"model_seed", c.model_seed},
      {"train_seed", c.train_seed},
      {"eval_seed", c.eval_seed},
      {"num_tasks", c.num_tasks},
      {"support_size", c.support_size},
      {"query_size", c.query_size},
      {"noise_sigma", c.noise_sigma},
      {"inner_steps", c.inner_steps},
      {"inner_lr", c.inner_lr},
      {"outer_lr", c.outer_lr},
      {"alpha_recon", c.alpha_recon},
      {"alpha_kl", c.alpha_kl},
      {"alpha_l2", c.alpha_l2},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"mode", to_string(c.mode)},
      {"encoder_input", to_string(c.encoder_input)},
      {"elbo_covariates", to_string(c.elbo_covariates)},
      {"freeze_gates", c.freeze_gates},
      {"reptile_step", c.reptile_step},
      {"hidden", c.hidden},
      {"bias_transform", c.bias_transform},
      {"latent", c.latent},
      {"decoder_hidden", c.decoder_hidden},
      {"eval_tasks", c.eval_tasks},
      {"eval_support_size", c.eval_support_size},
      {"eval_query_size", c.eval_query_size},
      {"checkpoint_every", c.checkpoint_every},
      {"output_dir", c.output_dir},
  };
}

namespace {

using Setter = std::function<void(RunConfig&, const nlohmann::json&)>;

template <class T>
T get_as(const nlohmann::json& v, const std::string& key) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError("config: '" + key + "' must be a boolean");
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError("config: '" + key + "' must be a string");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_unsigned()) throw ConfigError("config: '" + key + "' must be a non-negative integer");
  } else {
    if (!v.is_number()) throw ConfigError("config: '" + key + "' must be a number");
  }
  return v.get<T>();
}

template <class T>
Setter field(T RunConfig::*member, const std::string& key) {
  return [member, key](RunConfig& c, const nlohmann::json& v) { c.*member = get_as<T>(v, key); };
}

template <class E>
Setter enum_field(E RunConfig::*member, const std::string& key, E (*parse)(const std::string&)) {
  return [member, key, parse](RunConfig& c, const nlohmann::json& v) {
    try {
      c.*member = parse(get_as<std::string>(v, key));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["algorithm"] = enum_field(&RunConfig::algorithm, "algorithm", &parse_algorithm);
    t["variant"] = enum_field(&RunConfig::variant, "variant", &parse_variant);
    t["dependence"] = enum_field(&RunConfig::dependence, "dependence", &parse_dependence);
    t["data_seed"] = field(&RunConfig::data_seed, "data_seed");
    t["model_seed"] = field(&RunConfig::model_seed, "model_seed");
    t["train_seed"] = field(&RunConfig::train_seed, "train_seed");
    t["eval_seed"] = field(&RunConfig::eval_seed, "eval_seed");
    t["num_tasks"] = field(&RunConfig::num_tasks, "num_tasks");
    t["support_size"] = field(&RunConfig::support_size, "support_size");
    t["query_size"] = field(&RunConfig::query_size, "query_size");
    t["noise_sigma"] = field(&RunConfig::noise_sigma, "noise_sigma");
    t["inner_steps"] = field(&RunConfig::inner_steps, "inner_steps");
    t["inner_lr"] = field(&RunConfig::inner_lr, "inner_lr");
    t["outer_lr"] = field(&RunConfig::outer_lr, "outer_lr");
    t["alpha_recon"] = field(&RunConfig::alpha_recon, "alpha_recon");
    t["alpha_kl"] = field(&RunConfig::alpha_kl, "alpha_kl");
    t["alpha_l2"] = field(&RunConfig::alpha_l2, "alpha_l2");
    t["batch_size"] = field(&RunConfig::batch_size, "batch_size");
    t["epochs"] = field(&RunConfig::epochs, "epochs");
    t["mode"] = enum_field(&RunConfig::mode, "mode", &parse_grad_mode);
    t["encoder_input"] = enum_field(&RunConfig::encoder_input, "encoder_input", &parse_encoder_input);
    t["elbo_covariates"] = enum_field(&RunConfig::elbo_covariates, "elbo_covariates", &parse_elbo_covariates);
    t["freeze_gates"] = field(&RunConfig::freeze_gates, "freeze_gates");
    t["reptile_step"] = field(&RunConfig::reptile_step, "reptile_step");
    t["hidden"] = [](RunConfig& c, const nlohmann::json& v) {
      if (!v.is_array()) throw ConfigError("config: 'hidden' must be an array of positive integers");
      c.hidden.clear();
      for (const auto& e : v) c.hidden.push_back(get_as<std::size_t>(e, "hidden"));
    };
    t["bias_transform"] = field(&RunConfig::bias_transform, "bias_transform");
    t["latent"] = field(&RunConfig::latent, "latent");
    t["decoder_hidden"] = field(&RunConfig::decoder_hidden, "decoder_hidden");
    t["eval_tasks"] = field(&RunConfig::eval_tasks, "eval_tasks");
    t["eval_support_size"] = field(&RunConfig::eval_support_size, "eval_support_size");
    t["eval_query_size"] = field(&RunConfig::eval_query_size, "eval_query_size");
    t["checkpoint_every"] = field(&RunConfig::checkpoint_every, "checkpoint_every");
    t["output_dir"] = field(&RunConfig::output_dir, "output_dir");
    return t;
  }();
  return table;
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& j, RunConfig base) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  for (const auto& [key, value] : j.items()) {
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("config: unknown key '" + key + "'");
    it->second(base, value);
  }
  base.validate();
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j, std::move(base));
}

void save_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << to_json(cfg).dump(2) << "\n";
  if (!os) throw std::runtime_error("error while writing '" + path + "'");
}

}  // namespace covmeta
