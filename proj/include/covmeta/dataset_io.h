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

// Dataset file:
//
//   "COVMETA-DATASET\n"
//   u64 manifest length, manifest JSON (format_version, variant, dependence,
//       num_modes, modes [{mu, sigma, class}], weights, noise_sigma,
//       meta_seed, task_seed, num_tasks, support_size, query_size,
//       record_layout, rng)
//   num_tasks records, each:
//       f64 support_x[support_size], f64 support_y[support_size],
//       f64 query_x[query_size],     f64 query_y[query_size],
//       f64 hypothesis_params[3],
//       u32 mode, u32 family, u32 hypothesis_class
//
// All numbers little-endian; doubles are raw IEEE-754 bits, so a
// write -> read -> write cycle is byte identical.

#pragma once

#include <string>

#include <json.hpp>

#include "covmeta/taskgen.h"

namespace covmeta {

nlohmann::json manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

// Manifest only; does not read the records.
DatasetManifest read_dataset_manifest(const std::string& path);

}  // namespace covmeta
