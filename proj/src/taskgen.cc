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

#include "covmeta/taskgen.h"

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace covmeta {

namespace {

// Stream namespaces under a seed.
constexpr std::uint64_t kModesStream = 0x6d6f646573ULL;  // "modes"
constexpr std::uint64_t kTasksStream = 0x7461736b73ULL;  // "tasks"

constexpr ParamRange kSlopeRange{-3.0, 3.0};
constexpr ParamRange kShiftRange{-3.0, 3.0};
constexpr ParamRange kCurvatureNeg{-0.15, -0.02};
constexpr ParamRange kCurvaturePos{0.02, 0.15};

double draw(Rng& rng, const ParamRange& r) { return rng.uniform(r.lo, r.hi); }

// Fair coin between the negative and positive curvature intervals.
double draw_signed_curvature(Rng& rng) {
  const bool negative = rng.uniform() < 0.5;
  return draw(rng, negative ? kCurvatureNeg : kCurvaturePos);
}

bool in_signed_curvature(double a) { return kCurvatureNeg.contains(a) || kCurvaturePos.contains(a); }

}  // namespace

std::string to_string(Family f) {
  switch (f) {
    case Family::kSine: return "sine";
    case Family::kQuad: return "quad";
    case Family::kLinear: return "linear";
    case Family::kTransformedL1: return "transformed-l1";
    case Family::kTanh: return "tanh";
  }
  throw std::invalid_argument("unknown family");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kSine: return "sine";
    case Variant::kSineQuadLinear: return "sine-quad-linear";
    case Variant::kFive: return "five";
  }
  throw std::invalid_argument("unknown variant");
}

std::string to_string(Dependence d) {
  return d == Dependence::kDependent ? "dependent" : "independent";
}

Family parse_family(const std::string& s) {
  for (Family f : {Family::kSine, Family::kQuad, Family::kLinear, Family::kTransformedL1, Family::kTanh}) {
    if (to_string(f) == s) return f;
  }
  throw std::invalid_argument("unknown hypothesis family '" + s + "'");
}

Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::kSine, Variant::kSineQuadLinear, Variant::kFive}) {
    if (to_string(v) == s) return v;
  }
  throw std::invalid_argument("unknown dataset variant '" + s + "' (expected sine, sine-quad-linear or five)");
}

Dependence parse_dependence(const std::string& s) {
  if (s == "dependent") return Dependence::kDependent;
  if (s == "independent") return Dependence::kIndependent;
  throw std::invalid_argument("unknown dependence '" + s + "' (expected dependent or independent)");
}

double eval_hypothesis(const Hypothesis& h, double x) {
  const auto& [a, p1, p2] = h.params;
  switch (h.family) {
    case Family::kSine: return a * (std::sin(p1 * x) + p2);
    case Family::kQuad: return a * (x - p1) * (x - p1) + p2;
    case Family::kLinear: return a * x + p1;
    case Family::kTransformedL1: return a * std::abs(x - p1) + p2;
    case Family::kTanh: return a * std::tanh(x - p1) + p2;
  }
  throw std::invalid_argument("eval_hypothesis: unknown family");
}

SineRanges sine_ranges() { return {{0.1, 5.0}, {0.5, 2.0}, {0.0, 2.0 * std::numbers::pi}}; }

SineRanges sine_partition(std::size_t p, std::size_t num_parts) {
  if (num_parts == 0 || p < 1 || p > num_parts) {
    throw std::out_of_range("sine_partition: part " + std::to_string(p) + " of " + std::to_string(num_parts));
  }
  const auto split = [&](const ParamRange& r) {
    const double width = (r.hi - r.lo) / static_cast<double>(num_parts);
    const double lo = r.lo + width * static_cast<double>(p - 1);
    const double hi = p == num_parts ? r.hi : r.lo + width * static_cast<double>(p);
    return ParamRange{lo, hi};
  };
  const SineRanges full = sine_ranges();
  return {split(full.amplitude), split(full.frequency), split(full.offset)};
}

bool hypothesis_in_range(const Hypothesis& h) {
  const auto& [a, p1, p2] = h.params;
  switch (h.family) {
    case Family::kSine: {
      const SineRanges r = sine_ranges();
      return r.amplitude.contains(a) && r.frequency.contains(p1) && r.offset.contains(p2);
    }
    case Family::kQuad:
    case Family::kTransformedL1: return in_signed_curvature(a) && kShiftRange.contains(p1) && kShiftRange.contains(p2);
    case Family::kLinear: return kSlopeRange.contains(a) && kShiftRange.contains(p1);
    case Family::kTanh: return kSlopeRange.contains(a) && kShiftRange.contains(p1) && kShiftRange.contains(p2);
  }
  return false;
}

std::size_t modes_for_variant(Variant v) { return v == Variant::kFive ? 5 : 3; }

std::vector<Family> MetaDistribution::families() const {
  switch (variant) {
    case Variant::kSine: return {Family::kSine};
    case Variant::kSineQuadLinear: return {Family::kSine, Family::kQuad, Family::kLinear};
    case Variant::kFive:
      return {Family::kSine, Family::kQuad, Family::kLinear, Family::kTransformedL1, Family::kTanh};
  }
  return {};
}

std::size_t MetaDistribution::num_classes() const {
  return variant == Variant::kSine ? modes_for_variant(variant) : families().size();
}

Family MetaDistribution::class_family(std::size_t cls) const {
  if (variant == Variant::kSine) return Family::kSine;
  return families().at(cls);
}

MetaDistribution build_meta_distribution(Variant variant, Dependence dependence, std::uint64_t seed) {
  MetaDistribution md;
  md.variant = variant;
  md.dependence = dependence;
  md.seed = seed;
  Rng rng = Rng(seed).split(kModesStream);
  const std::size_t num_modes = modes_for_variant(variant);
  for (std::size_t p = 0; p < num_modes; ++p) {
    CovariateMode m;
    m.mu = rng.uniform(-10.0, 10.0);
    m.sigma = 10.0 * (1.0 - rng.uniform());  // (0, 10]
    md.modes.push_back(m);
  }
  double total = 0.0;
  for (std::size_t p = 0; p < num_modes; ++p) {
    md.weights.push_back(rng.exponential());
    total += md.weights.back();
  }
  for (double& w : md.weights) w /= total;
  return md;
}

namespace {

Hypothesis draw_hypothesis(const MetaDistribution& md, std::size_t cls, Rng& rng) {
  Hypothesis h;
  h.family = md.class_family(cls);
  switch (h.family) {
    case Family::kSine: {
      const SineRanges r = md.variant == Variant::kSine ? sine_partition(cls + 1, md.num_classes()) : sine_ranges();
      h.params = {draw(rng, r.amplitude), draw(rng, r.frequency), draw(rng, r.offset)};
      break;
    }
    case Family::kQuad:
    case Family::kTransformedL1: {
      const double a = draw_signed_curvature(rng);
      const double c = draw(rng, kShiftRange);
      h.params = {a, c, draw(rng, kShiftRange)};
      break;
    }
    case Family::kLinear: {
      const double a = draw(rng, kSlopeRange);
      h.params = {a, draw(rng, kShiftRange), 0.0};
      break;
    }
    case Family::kTanh: {
      const double a = draw(rng, kSlopeRange);
      const double c = draw(rng, kShiftRange);
      h.params = {a, c, draw(rng, kShiftRange)};
      break;
    }
  }
  return h;
}

}  // namespace

// Draw order: mode, class (independent case only), hypothesis parameters,
// support covariates, query covariates, support noise, query noise.
Task sample_task(const MetaDistribution& md, Rng& rng, const TaskSizes& sizes) {
  if (md.modes.empty() || md.weights.size() != md.modes.size()) {
    throw std::invalid_argument("sample_task: meta-distribution has no modes");
  }
  Task t;
  t.mode = rng.categorical(md.weights);
  t.hypothesis_class =
      md.dependence == Dependence::kDependent ? md.dependent_class(t.mode) : rng.index(md.num_classes());
  t.hypothesis = draw_hypothesis(md, t.hypothesis_class, rng);

  const CovariateMode& m = md.modes[t.mode];
  t.support_x.resize(sizes.support);
  t.query_x.resize(sizes.query);
  for (double& x : t.support_x) x = rng.normal(m.mu, m.sigma);
  for (double& x : t.query_x) x = rng.normal(m.mu, m.sigma);
  const auto label = [&](const std::vector<double>& xs, std::vector<double>& ys) {
    ys.resize(xs.size());
    for (std::size_t j = 0; j < xs.size(); ++j) ys[j] = eval_hypothesis(t.hypothesis, xs[j]) + md.noise_sigma * rng.normal();
  };
  label(t.support_x, t.support_y);
  label(t.query_x, t.query_y);
  return t;
}

Rng task_stream(std::uint64_t seed, std::uint64_t index) { return Rng(seed).split(kTasksStream).split(index); }

Task generate_task(const MetaDistribution& md, std::uint64_t seed, std::uint64_t index, const TaskSizes& sizes) {
  Rng rng = task_stream(seed, index);
  return sample_task(md, rng, sizes);
}

Dataset generate_dataset(const MetaDistribution& md, std::size_t num_tasks, std::uint64_t seed,
                         const TaskSizes& sizes) {
  if (num_tasks == 0) throw std::invalid_argument("generate_dataset: need at least one task");
  Dataset ds;
  ds.manifest.meta = md;
  ds.manifest.task_seed = seed;
  ds.manifest.num_tasks = num_tasks;
  ds.manifest.sizes = sizes;
  ds.tasks.reserve(num_tasks);
  for (std::size_t i = 0; i < num_tasks; ++i) ds.tasks.push_back(generate_task(md, seed, i, sizes));
  return ds;
}

double empirical_mutual_information(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("mutual information: need equal, non-empty samples");
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  std::map<std::size_t, double> pa, pb;
  const double n = static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0 / n;
    pa[a[i]] += 1.0 / n;
    pb[b[i]] += 1.0 / n;
  }
  double mi = 0.0;
  for (const auto& [key, pj] : joint) mi += pj * std::log(pj / (pa[key.first] * pb[key.second]));
  return mi;
}

}  // namespace covmeta
