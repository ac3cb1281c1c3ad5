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

// Synthetic multimodal regression tasks.
//
// A meta-distribution fixes P covariate modes N(mu_p, sigma_p^2) and mode
// weights once. A task picks a mode, draws covariates from it, picks a
// hypothesis and labels the covariates with y = f(x) + N(0, noise^2).
//
// In the dependent case the mode decides the hypothesis class: for the
// "sine-quad-linear" and "five" variants mode p uses family p (in the order
// sine, quad, linear, transformed-L1, tanh); for the "sine" variant mode p
// uses the p-th equal sub-interval of every sine parameter range. In the
// independent case the class (family, or sine sub-interval) is drawn
// uniformly regardless of the mode.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "covmeta/rng.h"

namespace covmeta {

enum class Family { kSine, kQuad, kLinear, kTransformedL1, kTanh };
enum class Variant { kSine, kSineQuadLinear, kFive };
enum class Dependence { kDependent, kIndependent };

std::string to_string(Family f);
std::string to_string(Variant v);
std::string to_string(Dependence d);
Family parse_family(const std::string& s);
Variant parse_variant(const std::string& s);
Dependence parse_dependence(const std::string& s);

struct CovariateMode {
  double mu = 0.0;
  double sigma = 1.0;  // standard deviation
  bool operator==(const CovariateMode&) const = default;
};

// params: sine (A, w, b); quad (A, c, b); linear (A, b, unused);
// transformed-L1 (A, c, b); tanh (A, c, b).
struct Hypothesis {
  Family family = Family::kSine;
  std::array<double, 3> params{};
  bool operator==(const Hypothesis&) const = default;
};

double eval_hypothesis(const Hypothesis& h, double x);

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

struct SineRanges {
  ParamRange amplitude;
  ParamRange frequency;
  ParamRange offset;
};

// Full sine parameter ranges.
SineRanges sine_ranges();
// The p-th (1-based) of P equal sub-intervals of every sine range.
SineRanges sine_partition(std::size_t p, std::size_t num_parts);

// True if h's parameters lie in the declared ranges for its family.
bool hypothesis_in_range(const Hypothesis& h);

struct MetaDistribution {
  Variant variant = Variant::kSine;
  Dependence dependence = Dependence::kDependent;
  std::vector<CovariateMode> modes;
  std::vector<double> weights;
  double noise_sigma = 0.3;
  std::uint64_t seed = 0;

  std::size_t num_modes() const { return modes.size(); }
  // Hypothesis families available in this variant.
  std::vector<Family> families() const;
  // Number of hypothesis classes (families, or sine sub-intervals).
  std::size_t num_classes() const;
  // Class a mode maps to in the dependent case.
  std::size_t dependent_class(std::size_t mode) const { return mode; }
  Family class_family(std::size_t cls) const;
  bool operator==(const MetaDistribution&) const = default;
};

std::size_t modes_for_variant(Variant v);

struct TaskSizes {
  std::size_t support = 5;
  std::size_t query = 5;
};

struct Task {
  std::size_t mode = 0;
  // Hypothesis class: family index within the variant, or sine sub-interval.
  std::size_t hypothesis_class = 0;
  Hypothesis hypothesis;
  std::vector<double> support_x, support_y;
  std::vector<double> query_x, query_y;
  bool operator==(const Task&) const = default;
};

// Draws modes from (U(-10, 10), U(0, 10]) and Dirichlet(1) weights.
MetaDistribution build_meta_distribution(Variant variant, Dependence dependence, std::uint64_t seed);

Task sample_task(const MetaDistribution& md, Rng& rng, const TaskSizes& sizes = {});

// Stream for task `index` of a dataset generated with `seed`.
Rng task_stream(std::uint64_t seed, std::uint64_t index);

// Task `index` of the dataset (md, seed); any subset regenerates identically.
Task generate_task(const MetaDistribution& md, std::uint64_t seed, std::uint64_t index, const TaskSizes& sizes = {});

struct DatasetManifest {
  MetaDistribution meta;
  std::uint64_t task_seed = 0;
  std::size_t num_tasks = 0;
  TaskSizes sizes;
  bool operator==(const DatasetManifest& o) const {
    return meta == o.meta && task_seed == o.task_seed && num_tasks == o.num_tasks && sizes.support == o.sizes.support &&
           sizes.query == o.sizes.query;
  }
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<Task> tasks;
};

Dataset generate_dataset(const MetaDistribution& md, std::size_t num_tasks, std::uint64_t seed,
                         const TaskSizes& sizes = {});

// Mutual information (nats) between two discrete labels from paired samples.
double empirical_mutual_information(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b);

}  // namespace covmeta
