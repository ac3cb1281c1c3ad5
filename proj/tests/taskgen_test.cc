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


#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "covmeta/dataset_io.h"
#include "covmeta/taskgen.h"

namespace covmeta {
namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("covmeta_taskgen_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

TEST_CASE("hypothesis formulas") {
  CHECK(eval_hypothesis({Family::kSine, {1, 1, 0}}, 0.0) == 0.0);
  CHECK(std::abs(eval_hypothesis({Family::kSine, {2, 0.5, 1}}, std::numbers::pi) - 4.0) <= 1e-15);
  CHECK(std::abs(eval_hypothesis({Family::kQuad, {0.1, 0, 0}}, 2.0) - 0.4) <= 1e-15);
  CHECK(eval_hypothesis({Family::kQuad, {-0.1, 1, 2}}, 1.0) == 2.0);
  CHECK(eval_hypothesis({Family::kLinear, {-2, 1.5, 0}}, 3.0) == -4.5);
  CHECK(eval_hypothesis({Family::kTransformedL1, {0.05, 1.5, -2}}, 1.5) == -2.0);
  CHECK(eval_hypothesis({Family::kTransformedL1, {0.1, 1, 0}}, -1.0) == doctest::Approx(0.2));
  CHECK(eval_hypothesis({Family::kTanh, {2, 0, 1}}, 0.0) == 1.0);
}

TEST_CASE("sine partition splits each range into equal thirds") {
  const SineRanges p1 = sine_partition(1, 3);
  CHECK(p1.amplitude.lo == 0.1);
  CHECK(std::abs(p1.amplitude.hi - (0.1 + 4.9 / 3)) <= 1e-12);
  CHECK(std::abs(p1.amplitude.hi - 1.7333333333333334) <= 1e-12);
  const SineRanges p3 = sine_partition(3, 3);
  CHECK(std::abs(p3.frequency.lo - 1.5) <= 1e-12);
  CHECK(std::abs(p3.frequency.hi - 2.0) <= 1e-12);
  CHECK(std::abs(p3.offset.hi - 2 * std::numbers::pi) <= 1e-12);
  const SineRanges full = sine_ranges();
  for (std::size_t p = 1; p < 3; ++p) {
    CHECK(std::abs(sine_partition(p, 3).offset.hi - sine_partition(p + 1, 3).offset.lo) <= 1e-12);
  }
  CHECK(sine_partition(1, 3).frequency.lo == full.frequency.lo);
  CHECK_THROWS_AS(sine_partition(0, 3), std::out_of_range);
  CHECK_THROWS_AS(sine_partition(4, 3), std::out_of_range);
}

TEST_CASE("meta-distribution is deterministic and well formed") {
  for (Variant v : {Variant::kSine, Variant::kSineQuadLinear, Variant::kFive}) {
    for (Dependence d : {Dependence::kDependent, Dependence::kIndependent}) {
      const MetaDistribution a = build_meta_distribution(v, d, 99);
      CHECK(a == build_meta_distribution(v, d, 99));
      CHECK(a.num_modes() == (v == Variant::kFive ? 5u : 3u));
      double total = 0;
      for (double w : a.weights) {
        CHECK(w >= 0.0);
        total += w;
      }
      CHECK(std::abs(total - 1.0) <= 1e-12);
      for (const CovariateMode& m : a.modes) {
        CHECK(m.mu >= -10.0);
        CHECK(m.mu <= 10.0);
        CHECK(m.sigma > 0.0);
        CHECK(m.sigma <= 10.0);
      }
    }
  }
  CHECK(!(build_meta_distribution(Variant::kSine, Dependence::kDependent, 1) ==
          build_meta_distribution(Variant::kSine, Dependence::kDependent, 2)));
}

TEST_CASE("dependent case: the mode fixes the family or sine sub-range") {
  for (Variant v : {Variant::kSine, Variant::kSineQuadLinear, Variant::kFive}) {
    const MetaDistribution md = build_meta_distribution(v, Dependence::kDependent, 5);
    std::vector<int> per_mode(md.num_modes(), 0);
    std::uint64_t index = 0;
    // 1,000 tasks per mode, drawn until every mode has its quota.
    while (*std::min_element(per_mode.begin(), per_mode.end()) < 1000) {
      const Task t = generate_task(md, 7, index++);
      if (per_mode[t.mode] >= 1000) continue;
      ++per_mode[t.mode];
      REQUIRE(t.hypothesis_class == t.mode);
      REQUIRE(t.hypothesis.family == md.class_family(t.mode));
      if (v == Variant::kSine) {
        const SineRanges r = sine_partition(t.mode + 1, 3);
        REQUIRE(r.amplitude.contains(t.hypothesis.params[0]));
        REQUIRE(r.frequency.contains(t.hypothesis.params[1]));
        REQUIRE(r.offset.contains(t.hypothesis.params[2]));
      }
      if (index > 2000000) FAIL("a mode is too rare to reach its quota");
    }
  }
}

TEST_CASE("independent case: mode and class carry no mutual information") {
  for (Variant v : {Variant::kSine, Variant::kSineQuadLinear, Variant::kFive}) {
    const MetaDistribution md = build_meta_distribution(v, Dependence::kIndependent, 6);
    std::vector<std::size_t> modes, classes;
    Rng root(8);
    for (std::uint64_t i = 0; i < 100000; ++i) {
      Rng rng = root.split(i);
      const Task t = sample_task(md, rng, {1, 1});
      modes.push_back(t.mode);
      classes.push_back(t.hypothesis_class);
    }
    const double mi = empirical_mutual_information(modes, classes);
    CHECK_MESSAGE(mi <= 0.01, to_string(v) << " mutual information " << mi);
  }
}

TEST_CASE("mutual information of identical and independent labels") {
  std::vector<std::size_t> a, b;
  for (std::size_t i = 0; i < 4000; ++i) {
    a.push_back(i % 4);
    b.push_back((i / 4) % 2);
  }
  CHECK(std::abs(empirical_mutual_information(a, a) - std::log(4.0)) <= 1e-12);
  CHECK(std::abs(empirical_mutual_information(a, b)) <= 1e-12);
}

TEST_CASE("covariate means and mode frequencies stay within CLT bounds") {
  const MetaDistribution md = build_meta_distribution(Variant::kFive, Dependence::kDependent, 21);
  const std::size_t n = 10000;
  const Dataset ds = generate_dataset(md, n, 22, {1, 1});
  std::vector<double> counts(md.num_modes(), 0.0);
  for (const Task& t : ds.tasks) ++counts[t.mode];
  for (std::size_t p = 0; p < md.num_modes(); ++p) {
    const double w = md.weights[p];
    CHECK(std::abs(counts[p] / n - w) <= 3.0 * std::sqrt(w * (1 - w) / n) + 1e-12);
  }
  // 10,000 covariates from each mode.
  for (std::size_t p = 0; p < md.num_modes(); ++p) {
    MetaDistribution single = md;
    single.weights.assign(md.num_modes(), 0.0);
    single.weights[p] = 1.0;
    double s = 0;
    Rng root(23);
    for (std::uint64_t i = 0; i < 1000; ++i) {
      Rng rng = root.split(i);
      const Task t = sample_task(single, rng, {10, 0});
      for (double x : t.support_x) s += x;
    }
    CHECK(std::abs(s / 10000 - md.modes[p].mu) <= 3.0 * md.modes[p].sigma / 100);
  }
}

TEST_CASE("every sampled hypothesis lies in its declared ranges") {
  for (Variant v : {Variant::kSineQuadLinear, Variant::kFive, Variant::kSine}) {
    for (Dependence d : {Dependence::kDependent, Dependence::kIndependent}) {
      const MetaDistribution md = build_meta_distribution(v, d, 31);
      const Dataset ds = generate_dataset(md, 5000, 32, {1, 1});
      for (const Task& t : ds.tasks) REQUIRE(hypothesis_in_range(t.hypothesis));
    }
  }
  CHECK(!hypothesis_in_range({Family::kQuad, {0.0, 0, 0}}));
  CHECK(!hypothesis_in_range({Family::kSine, {6.0, 1, 1}}));
  CHECK(hypothesis_in_range({Family::kQuad, {-0.1, 0, 0}}));
}

TEST_CASE("a single task regenerates identically from (seed, index)") {
  const MetaDistribution md = build_meta_distribution(Variant::kFive, Dependence::kIndependent, 41);
  const Dataset ds = generate_dataset(md, 100, 42);
  CHECK(generate_task(md, 42, 47) == ds.tasks[47]);
  CHECK(!(generate_task(md, 43, 47) == ds.tasks[47]));
}

TEST_CASE("zero noise gives exact responses") {
  MetaDistribution md = build_meta_distribution(Variant::kFive, Dependence::kDependent, 51);
  md.noise_sigma = 0.0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const Task t = generate_task(md, 52, i);
    for (std::size_t j = 0; j < t.support_x.size(); ++j) {
      CHECK(t.support_y[j] == eval_hypothesis(t.hypothesis, t.support_x[j]));
    }
    for (std::size_t j = 0; j < t.query_x.size(); ++j) CHECK(t.query_y[j] == eval_hypothesis(t.hypothesis, t.query_x[j]));
  }
}

TEST_CASE("noise residuals have the configured spread") {
  const MetaDistribution md = build_meta_distribution(Variant::kSine, Dependence::kDependent, 53);
  const Dataset ds = generate_dataset(md, 2000, 54);
  double s2 = 0;
  std::size_t n = 0;
  for (const Task& t : ds.tasks) {
    for (std::size_t j = 0; j < t.support_x.size(); ++j, ++n) {
      const double r = t.support_y[j] - eval_hypothesis(t.hypothesis, t.support_x[j]);
      s2 += r * r;
    }
  }
  CHECK(std::abs(std::sqrt(s2 / n) - 0.3) <= 0.01);
}

TEST_CASE("dataset files round trip byte for byte") {
  const MetaDistribution md = build_meta_distribution(Variant::kSineQuadLinear, Dependence::kDependent, 61);
  const Dataset ds = generate_dataset(md, 40, 62);
  const std::string a = temp_path("a.bin"), b = temp_path("b.bin");
  write_dataset(a, ds);
  const Dataset back = read_dataset(a);
  CHECK(back.manifest == ds.manifest);
  CHECK(back.tasks == ds.tasks);
  write_dataset(b, back);
  CHECK(slurp(a) == slurp(b));
  CHECK(read_dataset_manifest(a) == ds.manifest);

  const std::string bytes = slurp(a);
  std::ofstream(b, std::ios::binary | std::ios::trunc).write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 9));
  CHECK_THROWS(read_dataset(b));
  std::remove(a.c_str());
  std::remove(b.c_str());
}

TEST_CASE("anchor fixture: quad and linear tasks sit in their anchor covariate regions") {
  std::ifstream is(std::string(COVMETA_FIXTURE_DIR) + "/anchor_sine_quad_linear.json");
  REQUIRE(is.good());
  const DatasetManifest m = manifest_from_json(nlohmann::json::parse(is));
  CHECK(m.meta.modes[1] == CovariateMode{-7.0, 1.0});
  CHECK(m.meta.modes[2] == CovariateMode{7.0, 3.0});
  const Dataset ds = generate_dataset(m.meta, m.num_tasks, m.task_seed, m.sizes);
  std::vector<double> sum(3, 0.0), count(3, 0.0);
  for (const Task& t : ds.tasks) {
    CHECK(t.hypothesis.family == m.meta.class_family(t.mode));
    for (double x : t.support_x) {
      sum[t.mode] += x;
      ++count[t.mode];
    }
  }
  CHECK(m.meta.class_family(1) == Family::kQuad);
  CHECK(m.meta.class_family(2) == Family::kLinear);
  CHECK(std::abs(sum[1] / count[1] + 7.0) <= 3.0 * 1.0 / std::sqrt(count[1]));
  CHECK(std::abs(sum[2] / count[2] - 7.0) <= 3.0 * 3.0 / std::sqrt(count[2]));
}

TEST_CASE("names parse back") {
  for (Family f : {Family::kSine, Family::kQuad, Family::kLinear, Family::kTransformedL1, Family::kTanh}) {
    CHECK(parse_family(to_string(f)) == f);
  }
  for (Variant v : {Variant::kSine, Variant::kSineQuadLinear, Variant::kFive}) CHECK(parse_variant(to_string(v)) == v);
  CHECK_THROWS(parse_variant("six"));
}

}  // namespace
}  // namespace covmeta
