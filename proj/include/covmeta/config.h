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

// Run configuration: one JSON object, strictly validated (unknown keys and
// wrong types are errors). Missing keys keep their defaults.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "covmeta/meta.h"
#include "covmeta/nets.h"
#include "covmeta/taskgen.h"

namespace covmeta {

enum class Algorithm { kOurs, kMaml, kReptile, kMmamlLite };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& s);
std::string to_string(EncoderInput e);
EncoderInput parse_encoder_input(const std::string& s);

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  Algorithm algorithm = Algorithm::kOurs;
  Variant variant = Variant::kSine;
  Dependence dependence = Dependence::kDependent;

  std::uint64_t data_seed = 1;
  std::uint64_t model_seed = 2;
  std::uint64_t train_seed = 3;
  std::uint64_t eval_seed = 4;

  std::size_t num_tasks = 10000;
  std::size_t support_size = 5;
  std::size_t query_size = 5;
  double noise_sigma = 0.3;

  std::size_t inner_steps = 5;
  double inner_lr = 3e-5;
  double outer_lr = 0.001;
  double alpha_recon = 0.2;
  double alpha_kl = 0.1;
  double alpha_l2 = 0.0005;
  std::size_t batch_size = 25;
  std::size_t epochs = 10;
  GradMode mode = GradMode::kExact;
  EncoderInput encoder_input = EncoderInput::kCovariates;
  ElboCovariates elbo_covariates = ElboCovariates::kQuery;
  bool freeze_gates = false;
  double reptile_step = 0.1;

  std::vector<std::size_t> hidden = {100, 100, 100};
  std::size_t bias_transform = 20;
  std::size_t latent = 28;
  std::size_t decoder_hidden = 32;

  std::size_t eval_tasks = 1000;
  std::size_t eval_support_size = 5;
  std::size_t eval_query_size = 100;

  // Outer steps between periodic checkpoints; 0 writes the final one only.
  std::size_t checkpoint_every = 1000;
  std::string output_dir = "out";

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

// Architecture implied by the config (encoder input follows the algorithm).
Architecture architecture_of(const RunConfig& cfg);

// Inner/outer settings implied by the config. `mmaml-lite` forces
// alpha_recon = alpha_kl = 0 and the (x, y) encoder input.
MetaConfig meta_config_of(const RunConfig& cfg);

// Named presets: "default", "mmaml-lite", "workshop", "miniature".
RunConfig preset(const std::string& name);
std::vector<std::string> preset_names();

nlohmann::json to_json(const RunConfig& cfg);
// Overlays `j` on `base`; throws ConfigError on unknown keys or bad values.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});
void save_config(const std::string& path, const RunConfig& cfg);

}  // namespace covmeta
