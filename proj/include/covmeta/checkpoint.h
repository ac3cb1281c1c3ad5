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

// Model state and its checkpoint file.
//
//   "COVMETA-CKPT\n"
//   u64 header length, header JSON:
//       format_version, algorithm, architecture, config, layout [{name, shape}],
//       layout_hash (FNV-1a 64 of the layout, hex), num_params, step,
//       adam {learning_rate, beta1, beta2, epsilon, step}
//   f64 params[num_params], f64 first_moment[num_params],
//   f64 second_moment[num_params]

#pragma once

#include <cstdint>
#include <string>

#include "covmeta/config.h"
#include "covmeta/nets.h"
#include "covmeta/optim.h"

namespace covmeta {

struct ModelState {
  Algorithm algorithm = Algorithm::kOurs;
  Architecture arch;
  // ours, mmaml-lite.
  MetaParams<Tensor> meta;
  // maml, reptile.
  MlpParams<Tensor> shared;
  AdamState adam;
  // Completed outer steps.
  std::uint64_t step = 0;

  bool uses_meta() const { return algorithm == Algorithm::kOurs || algorithm == Algorithm::kMmamlLite; }
  Layout layout() const;
  Tensor flat() const;
  void set_flat(const Tensor& flat);
};

// Fresh model from cfg.model_seed.
ModelState init_model(const RunConfig& cfg);

std::uint64_t layout_hash(const Layout& layout);

struct Checkpoint {
  RunConfig config;
  ModelState model;
};

void save_checkpoint(const std::string& path, const RunConfig& cfg, const ModelState& model);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace covmeta
