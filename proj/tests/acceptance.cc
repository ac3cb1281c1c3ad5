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


// Acceptance gate. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Criteria 5-9 train full-size models; each
// run is cached under --work-dir keyed by its full configuration, so a rerun
// only repeats work whose configuration changed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "covmeta/checkpoint.h"
#include "covmeta/config.h"
#include "covmeta/dataset_io.h"
#include "covmeta/densities.h"
#include "covmeta/harness.h"

namespace covmeta {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool passed = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

// ---- 1: gradient oracle ----

Outcome criterion_gradcheck() {
  const auto t0 = Clock::now();
  const RunConfig cfg = preset("miniature");
  const GradcheckReport r = run_gradcheck(cfg, 1e-4);
  const double elapsed = seconds_since(t0);
  Outcome o{true, ""};
  for (const GradcheckCase& c : r.cases) {
    if (c.name == "ours/exact" || c.name == "maml/exact") {
      o.passed = o.passed && c.worst <= 1e-4;
      o.detail += c.name + " worst " + fmt(c.worst) + "; ";
    }
  }
  o.passed = o.passed && r.passed && elapsed < 60.0;
  o.detail += "runtime " + fmt(elapsed) + " s";
  return o;
}

// ---- 2: closed forms ----

Outcome criterion_closed_forms() {
  const auto ld = [](double x, double mu, double s) {
    return gaussian_log_density(Tensor::scalar(x), Tensor::scalar(mu), Tensor::scalar(s)).item();
  };
  const auto kl = [](double mu, double s) {
    return gaussian_kl_to_standard(Tensor::scalar(mu), Tensor::scalar(s)).item();
  };
  const double pi = 3.14159265358979323846;
  double worst = 0.0;
  worst = std::max(worst, std::abs(ld(0, 0, 1) + 0.5 * std::log(2 * pi)));
  worst = std::max(worst, std::abs(ld(1, 0, 1) + 0.5 * std::log(2 * pi) + 0.5));
  worst = std::max(worst, std::abs(ld(1.7, 1.7, 2.5) + 0.5 * std::log(2 * pi * 6.25)));
  worst = std::max(worst, std::abs(kl(1, 1) - 0.5));
  worst = std::max(worst, std::abs(kl(0, 2) - 0.5 * (4 - std::log(4.0) - 1)));
  worst = std::max(worst, std::abs(kl(0, 1)));
  Rng rng(2026);
  double min_kl = 1e300;
  for (int i = 0; i < 10000; ++i) {
    const double mu = rng.normal(0.0, 3.0);
    const double s = std::exp(rng.uniform(-4.0, 3.0));
    const double v = kl(mu, s);
    min_kl = std::min(min_kl, v);
    // Independent scalar formula.
    worst = std::max(worst, std::abs(v - 0.5 * (mu * mu + s * s - 2 * std::log(s) - 1)) / std::max(1.0, v));
  }
  return {worst <= 1e-10 && min_kl >= 0.0, "worst closed-form error " + fmt(worst) + ", min KL over 10000 draws " + fmt(min_kl)};
}

// ---- 3: structural invariants ----

Outcome criterion_structural(const fs::path& work) {
  std::vector<std::string> failed;
  RunConfig cfg = preset("miniature");
  const ModelState model = init_model(cfg);

  {  // encoder permutation invariance
    std::vector<double> xs = {3.0, -1.0, 0.5, 8.0, -4.5};
    const Kappa<Tensor> ref = encode_covariates(model.meta.encoder, encoder_rows(EncoderInput::kCovariates, xs, {}));
    std::sort(xs.begin(), xs.end());
    bool ok = true;
    do {
      const Kappa<Tensor> k = encode_covariates(model.meta.encoder, encoder_rows(EncoderInput::kCovariates, xs, {}));
      ok = ok && k.mu == ref.mu && k.sigma == ref.sigma;
    } while (std::next_permutation(xs.begin(), xs.end()));
    if (!ok) failed.push_back("permutation invariance");
  }
  {  // gate boundedness
    Rng rng(7);
    bool ok = true;
    for (int trial = 0; trial < 1000 && ok; ++trial) {
      Tensor z({model.arch.latent});
      for (double& v : z.data()) v = rng.normal(0.0, 10.0);
      const Tensor lambda = flatten(init_from_latent(model.meta.initializer, z));
      const Tensor base = flatten(model.meta.initializer.base);
      for (std::size_t i = 0; i < base.size(); ++i) ok = ok && std::abs(lambda[i]) <= std::abs(base[i]);
    }
    if (!ok) failed.push_back("gate boundedness");
  }
  const Dataset ds = generate_training_set(cfg);
  std::vector<const Task*> batch;
  for (const Task& t : ds.tasks) batch.push_back(&t);
  Rng noise_rng(8);
  std::vector<TaskNoise> noise;
  for (std::size_t i = 0; i < batch.size(); ++i) noise.push_back(draw_task_noise(noise_rng, model.arch.latent));
  {  // decoder gradient nullity
    MetaConfig mc = meta_config_of(cfg);
    mc.weights.recon = 0.0;
    mc.weights.l2 = 0.0;
    const Tensor g = meta_batch_gradient(model.meta, batch, noise, mc).grad;
    std::size_t offset = 0;
    bool ok = true;
    for (const LayoutEntry& e : model.layout()) {
      const std::size_t n = shape_size(e.shape);
      if (e.name.rfind("decoder.", 0) == 0) {
        for (std::size_t k = offset; k < offset + n; ++k) ok = ok && g[k] == 0.0;
      }
      offset += n;
    }
    if (!ok) failed.push_back("decoder gradient nullity");
  }
  {  // K = 0 exact / first-order
    MetaConfig mc = meta_config_of(cfg);
    mc.inner_steps = 0;
    mc.mode = GradMode::kExact;
    const Tensor a = meta_batch_gradient(model.meta, batch, noise, mc).grad;
    mc.mode = GradMode::kFirstOrder;
    const Tensor b = meta_batch_gradient(model.meta, batch, noise, mc).grad;
    if (!(a == b)) failed.push_back("K=0 agreement");
  }
  {  // checkpoint resume
    RunConfig rc = cfg;
    rc.num_tasks = 20;
    rc.epochs = 10;
    rc.checkpoint_every = 0;
    rc.output_dir = (work / "resume_check").string();
    fs::remove_all(rc.output_dir);
    const Dataset rds = generate_training_set(rc);
    const ModelState straight = train(rc, rds, init_model(rc));
    TrainOptions half;
    half.stop_after = straight.step / 2;
    half.write_checkpoints = true;
    train(rc, rds, init_model(rc), half);
    const ModelState resumed = train(rc, rds, load_checkpoint(checkpoint_path(rc, *half.stop_after)).model);
    if (!(resumed.flat() == straight.flat() && resumed.adam.second_moment == straight.adam.second_moment)) {
      failed.push_back("resume equivalence");
    }
  }
  {  // dataset regenerability
    RunConfig rc = cfg;
    rc.variant = Variant::kFive;
    rc.num_tasks = 200;
    const Dataset full = generate_training_set(rc);
    const MetaDistribution md = meta_distribution_of(rc);
    bool ok = true;
    for (std::uint64_t i : {0ULL, 47ULL, 199ULL}) {
      ok = ok && generate_task(md, rc.data_seed, i, {rc.support_size, rc.query_size}) == full.tasks[i];
    }
    if (!ok) failed.push_back("dataset regenerability");
  }
  std::string detail = "6 invariants checked";
  for (const auto& f : failed) detail += "; FAILED " + f;
  return {failed.empty(), detail};
}

// ---- 4: benchmark statistics ----

Outcome criterion_benchmark() {
  std::vector<std::string> notes;
  bool ok = true;
  for (Variant v : {Variant::kSine, Variant::kSineQuadLinear, Variant::kFive}) {
    const MetaDistribution md = build_meta_distribution(v, Dependence::kDependent, 1);
    std::vector<int> per_mode(md.num_modes(), 0);
    for (std::uint64_t i = 0; *std::min_element(per_mode.begin(), per_mode.end()) < 1000; ++i) {
      const Task t = generate_task(md, 2, i, {1, 1});
      if (per_mode[t.mode] >= 1000) continue;
      ++per_mode[t.mode];
      bool same = t.hypothesis.family == md.class_family(t.mode);
      if (v == Variant::kSine) {
        const SineRanges r = sine_partition(t.mode + 1, md.num_modes());
        same = same && r.amplitude.contains(t.hypothesis.params[0]) && r.frequency.contains(t.hypothesis.params[1]) &&
               r.offset.contains(t.hypothesis.params[2]);
      }
      ok = ok && same;
    }
  }
  notes.push_back(std::string("Case-I determinism ") + (ok ? "holds" : "violated"));

  double worst_mi = 0.0;
  for (Variant v : {Variant::kSine, Variant::kSineQuadLinear, Variant::kFive}) {
    const MetaDistribution md = build_meta_distribution(v, Dependence::kIndependent, 1);
    std::vector<std::size_t> a, b;
    for (std::uint64_t i = 0; i < 100000; ++i) {
      const Task t = generate_task(md, 3, i, {1, 1});
      a.push_back(t.mode);
      b.push_back(t.hypothesis_class);
    }
    worst_mi = std::max(worst_mi, empirical_mutual_information(a, b));
  }
  ok = ok && worst_mi <= 0.01;
  notes.push_back("Case-II max MI " + fmt(worst_mi) + " nats");

  bool clt = true;
  for (Variant v : {Variant::kSine, Variant::kSineQuadLinear, Variant::kFive}) {
    const MetaDistribution md = build_meta_distribution(v, Dependence::kDependent, 4);
    const std::size_t n = 10000;
    const Dataset ds = generate_dataset(md, n, 5, {1, 1});
    std::vector<double> counts(md.num_modes(), 0.0);
    for (const Task& t : ds.tasks) ++counts[t.mode];
    for (std::size_t p = 0; p < md.num_modes(); ++p) {
      const double w = md.weights[p];
      clt = clt && std::abs(counts[p] / n - w) <= 3.0 * std::sqrt(w * (1 - w) / n) + 1e-12;
      MetaDistribution single = md;
      single.weights.assign(md.num_modes(), 0.0);
      single.weights[p] = 1.0;
      double s = 0.0;
      for (std::uint64_t i = 0; i < 1000; ++i) {
        const Task t = generate_task(single, 6, i, {10, 0});
        for (double x : t.support_x) s += x;
      }
      clt = clt && std::abs(s / 10000 - md.modes[p].mu) <= 3.0 * md.modes[p].sigma / 100;
    }
  }
  ok = ok && clt;
  notes.push_back(std::string("CLT bounds ") + (clt ? "hold" : "violated"));
  std::string detail;
  for (const auto& s : notes) detail += (detail.empty() ? "" : "; ") + s;
  return {ok, detail};
}

// ---- 5-9: desk-scale training runs ----

class Runner {
 public:
  explicit Runner(fs::path work) : work_(std::move(work)) { fs::create_directories(work_); }

  // Post-adaptation mean MSE of a run, training and evaluating if the cached
  // result does not match the configuration.
  double post_mse(const std::string& name, RunConfig cfg) {
    const fs::path dir = work_ / name;
    cfg.output_dir = dir.string();
    cfg.checkpoint_every = 0;
    const std::string key = to_json(cfg).dump();
    const fs::path records = dir / "eval.csv";
    const fs::path key_file = dir / "run_config.json";
    if (fs::exists(records) && fs::exists(key_file) && slurp(key_file) == key) {
      return summarize(read_eval_records(records.string()), cfg, name).mean_post;
    }
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto t0 = Clock::now();
    const Dataset& ds = dataset(cfg);
    std::ofstream log(dir / "train_log.ndjson");
    TrainOptions opts;
    opts.log = &log;
    opts.write_checkpoints = true;
    const ModelState model = train(cfg, ds, init_model(cfg), opts);
    const auto records_v = evaluate(model, cfg);
    write_eval_records(records.string(), records_v);
    const EvalSummary s = summarize(records_v, cfg, name);
    write_eval_summary(summary_path(records.string()), s);
    std::ofstream(key_file) << key;
    std::cout << "  [run] " << name << ": post-adaptation MSE " << fmt(s.mean_post) << " +- " << fmt(s.ci_post) << " ("
              << fmt(seconds_since(t0)) << " s)" << std::endl;
    return s.mean_post;
  }

 private:
  static std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
  }

  const Dataset& dataset(const RunConfig& cfg) {
    const std::string key = to_string(cfg.variant) + "_" + to_string(cfg.dependence) + "_" + std::to_string(cfg.data_seed);
    auto it = datasets_.find(key);
    if (it == datasets_.end()) it = datasets_.emplace(key, generate_training_set(cfg)).first;
    return it->second;
  }

  fs::path work_;
  std::map<std::string, Dataset> datasets_;
};

RunConfig run_config(Algorithm algo, Variant v, Dependence d) {
  RunConfig c = algo == Algorithm::kMmamlLite ? preset("mmaml-lite") : preset("default");
  c.algorithm = algo;
  c.variant = v;
  c.dependence = d;
  return c;
}

std::string run_name(Algorithm algo, Variant v, Dependence d) {
  return to_string(v) + "_" + to_string(d) + "_" + to_string(algo);
}

double run(Runner& r, Algorithm algo, Variant v, Dependence d) {
  return r.post_mse(run_name(algo, v, d), run_config(algo, v, d));
}

Outcome criterion_sine(Runner& r) {
  const double ours = run(r, Algorithm::kOurs, Variant::kSine, Dependence::kDependent);
  const double maml = run(r, Algorithm::kMaml, Variant::kSine, Dependence::kDependent);
  return {ours < maml && ours <= 0.1, "ours " + fmt(ours) + " vs maml " + fmt(maml) + " (need ours < maml and ours <= 0.1)"};
}

Outcome criterion_sine_quad_linear(Runner& r) {
  const double ours = run(r, Algorithm::kOurs, Variant::kSineQuadLinear, Dependence::kDependent);
  const double maml = run(r, Algorithm::kMaml, Variant::kSineQuadLinear, Dependence::kDependent);
  const double lite = run(r, Algorithm::kMmamlLite, Variant::kSineQuadLinear, Dependence::kDependent);
  return {maml / ours >= 1.5 && ours < lite, "ours " + fmt(ours) + ", maml " + fmt(maml) + " (ratio " + fmt(maml / ours) +
                                                 ", need >= 1.5), mmaml-lite " + fmt(lite) + " (need ours < mmaml-lite)"};
}

Outcome criterion_five(Runner& r) {
  const double ours = run(r, Algorithm::kOurs, Variant::kFive, Dependence::kDependent);
  const double maml = run(r, Algorithm::kMaml, Variant::kFive, Dependence::kDependent);
  return {ours <= maml, "ours " + fmt(ours) + " vs maml " + fmt(maml) + " (need ours <= maml)"};
}

Outcome criterion_independent(Runner& r) {
  bool ok = true;
  std::string detail;
  for (Variant v : {Variant::kSine, Variant::kSineQuadLinear, Variant::kFive}) {
    const double ours = run(r, Algorithm::kOurs, v, Dependence::kIndependent);
    double best = 1e300;
    for (Algorithm a : {Algorithm::kMaml, Algorithm::kReptile, Algorithm::kMmamlLite}) {
      best = std::min(best, run(r, a, v, Dependence::kIndependent));
    }
    ok = ok && ours <= 2.0 * best;
    detail += (detail.empty() ? "" : "; ") + to_string(v) + ": ours " + fmt(ours) + " vs best baseline " + fmt(best);
  }
  return {ok, detail + " (need ours <= 2x best)"};
}

Outcome criterion_ablation(Runner& r) {
  int degraded = 0;
  std::string detail;
  for (int s = 0; s < 3; ++s) {
    RunConfig full = run_config(Algorithm::kOurs, Variant::kSineQuadLinear, Dependence::kDependent);
    full.model_seed += 10 * s;
    full.train_seed += 10 * s;
    RunConfig ablated = full;
    ablated.alpha_recon = 0.0;
    ablated.alpha_kl = 0.0;
    const std::string suffix = s == 0 ? "" : "_seed" + std::to_string(s);
    const double f = r.post_mse(run_name(Algorithm::kOurs, Variant::kSineQuadLinear, Dependence::kDependent) + suffix, full);
    const double a = r.post_mse("sine-quad-linear_dependent_ours-no-elbo" + suffix, ablated);
    if (a >= f) ++degraded;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(s) + ": full " + fmt(f) + ", ablated " + fmt(a);
  }
  return {degraded >= 2, detail + " (" + std::to_string(degraded) + "/3 degraded or unchanged)"};
}

}  // namespace
}  // namespace covmeta

int main(int argc, char** argv) {
  using namespace covmeta;
  CLI::App app{"Acceptance criteria"};
  std::string work_dir = "acceptance_runs";
  std::vector<int> only;
  app.add_option("--work-dir", work_dir, "Directory for cached training runs");
  app.add_option("--only", only, "Run only these criteria (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  Runner runner{fs::path(work_dir)};
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"meta-gradient oracle equivalence", [] { return criterion_gradcheck(); }},
      {"closed-form density checks", [] { return criterion_closed_forms(); }},
      {"structural invariants", [&] { return criterion_structural(fs::path(work_dir)); }},
      {"benchmark statistics", [] { return criterion_benchmark(); }},
      {"Case-I sine: ours beats maml", [&] { return criterion_sine(runner); }},
      {"Case-I sine-quad-linear: ours vs maml and mmaml-lite", [&] { return criterion_sine_quad_linear(runner); }},
      {"Case-I five: ours vs maml", [&] { return criterion_five(runner); }},
      {"Case-II parity", [&] { return criterion_independent(runner); }},
      {"ablation direction", [&] { return criterion_ablation(runner); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.passed) ++failures;
    std::cout << "criterion " << id << " " << (o.passed ? "PASS" : "FAIL") << ": " << criteria[i].first << " -- "
              << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
