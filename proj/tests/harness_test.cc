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
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "covmeta/checkpoint.h"
#include "covmeta/config.h"
#include "covmeta/dataset_io.h"
#include "covmeta/harness.h"

namespace covmeta {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("covmeta_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

RunConfig small_config(Algorithm algo = Algorithm::kOurs) {
  RunConfig c = preset("miniature");
  c.algorithm = algo;
  c.num_tasks = 20;
  c.batch_size = 2;
  c.epochs = 10;
  c.eval_tasks = 30;
  return c;
}

// ---- config ----

TEST_CASE("config json round trips and rejects unknown keys and bad values") {
  const RunConfig c = small_config(Algorithm::kReptile);
  CHECK(config_from_json(to_json(c)) == c);
  const auto bad = [](const char* text) { return config_from_json(nlohmann::json::parse(text)); };
  CHECK_THROWS_WITH_AS(bad(R"({"learning_rate": 0.1})"), doctest::Contains("learning_rate"), ConfigError);
  CHECK_THROWS_WITH_AS(bad(R"({"inner_steps": "five"})"), doctest::Contains("inner_steps"), ConfigError);
  CHECK_THROWS_WITH_AS(bad(R"({"num_tasks": 0})"), doctest::Contains("num_tasks"), ConfigError);
  CHECK_THROWS_WITH_AS(bad(R"({"algorithm": "protonet"})"), doctest::Contains("protonet"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"data_seed": 9, "eval_seed": 9})"), ConfigError);
  const RunConfig overlay = config_from_json(nlohmann::json::parse(R"({"epochs": 3})"), c);
  CHECK(overlay.epochs == 3);
  CHECK(overlay.algorithm == Algorithm::kReptile);
}

TEST_CASE("config files round trip") {
  const fs::path dir = scratch("config");
  const RunConfig c = small_config();
  save_config((dir / "c.json").string(), c);
  CHECK(load_config((dir / "c.json").string()) == c);
}

TEST_CASE("presets") {
  for (const std::string& name : preset_names()) CHECK_NOTHROW(preset(name).validate());
  CHECK(preset("default") == RunConfig{});
  CHECK(preset("workshop").alpha_kl == 0.01);
  const RunConfig lite = preset("mmaml-lite");
  CHECK(lite.algorithm == Algorithm::kMmamlLite);
  const MetaConfig mc = meta_config_of(lite);
  CHECK(mc.weights.recon == 0.0);
  CHECK(mc.weights.kl == 0.0);
  CHECK(mc.encoder_input == EncoderInput::kPairs);
  CHECK(architecture_of(lite).encoder_input == EncoderInput::kPairs);
  const RunConfig mini = preset("miniature");
  for (std::size_t h : mini.hidden) CHECK(h <= 8);
  CHECK(mini.latent <= 4);
  CHECK(mini.inner_steps <= 3);
  CHECK_THROWS_AS(preset("huge"), ConfigError);
}

// ---- checkpoints ----

TEST_CASE("checkpoint save, load, save is byte identical") {
  const fs::path dir = scratch("ckpt");
  for (Algorithm a : {Algorithm::kOurs, Algorithm::kMaml, Algorithm::kReptile, Algorithm::kMmamlLite}) {
    const RunConfig cfg = small_config(a);
    ModelState m = init_model(cfg);
    m.step = 7;
    save_checkpoint((dir / "a.ckpt").string(), cfg, m);
    const Checkpoint back = load_checkpoint((dir / "a.ckpt").string());
    CHECK(back.config == cfg);
    CHECK(back.model.flat() == m.flat());
    CHECK(back.model.step == 7);
    save_checkpoint((dir / "b.ckpt").string(), back.config, back.model);
    CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
  }
}

TEST_CASE("truncated or padded checkpoints are rejected") {
  const fs::path dir = scratch("ckpt_bad");
  const RunConfig cfg = small_config();
  save_checkpoint((dir / "a.ckpt").string(), cfg, init_model(cfg));
  const std::string bytes = slurp(dir / "a.ckpt");
  std::ofstream(dir / "short.ckpt", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 8));
  CHECK_THROWS(load_checkpoint((dir / "short.ckpt").string()));
  std::ofstream(dir / "long.ckpt", std::ios::binary) << bytes << "extra";
  CHECK_THROWS(load_checkpoint((dir / "long.ckpt").string()));
  std::ofstream(dir / "junk.ckpt", std::ios::binary) << "not a checkpoint";
  CHECK_THROWS(load_checkpoint((dir / "junk.ckpt").string()));
}

TEST_CASE("layout hash tracks names and shapes") {
  const RunConfig cfg = small_config();
  const Layout a = init_model(cfg).layout();
  Layout b = a;
  b.back().shape.back() += 1;
  CHECK(layout_hash(a) == layout_hash(init_model(cfg).layout()));
  CHECK(layout_hash(a) != layout_hash(b));
}

// ---- gen ----

TEST_CASE("generating twice writes identical files") {
  const fs::path dir = scratch("gen");
  RunConfig cfg = small_config();
  cfg.variant = Variant::kFive;
  write_dataset((dir / "a.bin").string(), generate_training_set(cfg));
  write_dataset((dir / "b.bin").string(), generate_training_set(cfg));
  CHECK(slurp(dir / "a.bin") == slurp(dir / "b.bin"));
  const nlohmann::json manifest = manifest_to_json(read_dataset_manifest((dir / "a.bin").string()));
  REQUIRE(manifest.at("modes").size() == 5);
  std::vector<std::string> families;
  for (const auto& m : manifest.at("modes")) families.push_back(m.at("family").get<std::string>());
  CHECK(families == std::vector<std::string>{"sine", "quad", "linear", "transformed-l1", "tanh"});
}

TEST_CASE("training rejects a dataset generated for another config") {
  RunConfig cfg = small_config();
  const Dataset ds = generate_training_set(cfg);
  RunConfig other = cfg;
  other.variant = Variant::kFive;
  CHECK_THROWS(train(other, ds, init_model(other)));
}

// ---- train ----

TEST_CASE("epoch order is a permutation that depends on the epoch") {
  const auto a = epoch_order(3, 0, 50);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 50; ++i) CHECK(sorted[i] == i);
  CHECK(epoch_order(3, 0, 50) == a);
  CHECK(epoch_order(3, 1, 50) != a);
  CHECK(steps_per_epoch(small_config(), 21) == 11);
}

TEST_CASE("resuming after 50 steps reproduces an uninterrupted 100-step run") {
  for (Algorithm algo : {Algorithm::kOurs, Algorithm::kMaml, Algorithm::kReptile}) {
    const fs::path dir = scratch("resume_" + to_string(algo));
    RunConfig cfg = small_config(algo);
    cfg.output_dir = dir.string();
    cfg.checkpoint_every = 0;
    const Dataset ds = generate_training_set(cfg);
    REQUIRE(total_steps(cfg, ds.tasks.size()) == 100);
    const ModelState straight = train(cfg, ds, init_model(cfg));

    TrainOptions half;
    half.stop_after = 50;
    half.write_checkpoints = true;
    train(cfg, ds, init_model(cfg), half);
    const Checkpoint ck = load_checkpoint(checkpoint_path(cfg, 50));
    REQUIRE(ck.model.step == 50);
    TrainOptions rest;
    rest.write_checkpoints = true;
    const ModelState resumed = train(cfg, ds, ck.model, rest);
    CHECK(resumed.flat() == straight.flat());
    CHECK(resumed.adam.first_moment == straight.adam.first_moment);
    CHECK(resumed.adam.second_moment == straight.adam.second_moment);
    CHECK(fs::exists(final_checkpoint_path(cfg)));
  }
}

TEST_CASE("logged totals satisfy the weighted-sum identity") {
  RunConfig cfg = small_config();
  cfg.epochs = 2;
  const Dataset ds = generate_training_set(cfg);
  std::ostringstream log;
  TrainOptions opts;
  opts.log = &log;
  train(cfg, ds, init_model(cfg), opts);
  std::istringstream lines(log.str());
  std::string line;
  int n = 0;
  for (; std::getline(lines, line); ++n) {
    const auto j = nlohmann::json::parse(line);
    const double total = j.at("total").get<double>();
    const double expected = cfg.alpha_l2 * j.at("l2").get<double>() + cfg.alpha_recon * j.at("recon").get<double>() +
                            cfg.alpha_kl * j.at("kl").get<double>() + j.at("task_nll").get<double>();
    CHECK(std::abs(total - expected) <= 1e-12 * std::max(1.0, std::abs(expected)));
    CHECK(j.at("step").get<int>() == n + 1);
  }
  CHECK(n == 20);
}

TEST_CASE("maml logs carry no ELBO terms") {
  RunConfig cfg = small_config(Algorithm::kMaml);
  cfg.epochs = 1;
  const Dataset ds = generate_training_set(cfg);
  TrainOptions opts;
  int n = 0;
  opts.on_step = [&](const StepLog& s) {
    ++n;
    CHECK(s.loss.recon == 0.0);
    CHECK(s.loss.kl == 0.0);
    CHECK(s.loss.l2 > 0.0);
  };
  train(cfg, ds, init_model(cfg), opts);
  CHECK(n == 10);
}

// ---- eval ----

TEST_CASE("without inner steps the adapted network is the initial one") {
  for (Algorithm algo : {Algorithm::kOurs, Algorithm::kMaml}) {
    RunConfig cfg = small_config(algo);
    cfg.inner_steps = 0;
    for (const EvalRecord& r : evaluate(init_model(cfg), cfg)) CHECK(r.mse_pre == r.mse_post);
  }
}

TEST_CASE("evaluation of an untrained model is finite and reproducible") {
  const RunConfig cfg = small_config();
  const auto a = evaluate(init_model(cfg), cfg);
  const auto b = evaluate(init_model(cfg), cfg);
  REQUIRE(a.size() == cfg.eval_tasks);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::isfinite(a[i].mse_post));
    CHECK(a[i].mse_post == b[i].mse_post);
    CHECK(a[i].task_id == i);
  }
}

TEST_CASE("evaluation refuses a model from another algorithm") {
  const RunConfig cfg = small_config();
  CHECK_THROWS(evaluate(init_model(small_config(Algorithm::kMaml)), cfg));
}

TEST_CASE("summary statistics match a direct computation") {
  const std::vector<double> v = {1.0, 2.0, 4.0, 7.0};
  const auto [mean, ci] = mean_and_ci(v);
  CHECK(std::abs(mean - 3.5) <= 1e-12);
  const double sd = std::sqrt(((2.5 * 2.5) + (1.5 * 1.5) + (0.5 * 0.5) + (3.5 * 3.5)) / 3.0);
  CHECK(std::abs(ci - 1.96 * sd / 2.0) <= 1e-12);

  const RunConfig cfg = small_config();
  const auto records = evaluate(init_model(cfg), cfg);
  double s = 0;
  for (const auto& r : records) s += r.mse_post;
  CHECK(std::abs(summarize(records, cfg, "x").mean_post - s / records.size()) <= 1e-12);
}

TEST_CASE("eval records and summaries round trip exactly") {
  const fs::path dir = scratch("records");
  const RunConfig cfg = small_config();
  const auto records = evaluate(init_model(cfg), cfg);
  const std::string path = (dir / "r.csv").string();
  write_eval_records(path, records);
  const auto back = read_eval_records(path);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].mse_pre == records[i].mse_pre);
    CHECK(back[i].mse_post == records[i].mse_post);
    CHECK(back[i].family == records[i].family);
  }
  const EvalSummary s = summarize(records, cfg, "ours");
  write_eval_summary(summary_path(path), s);
  const EvalSummary t = read_eval_summary(summary_path(path));
  CHECK(t.mean_post == s.mean_post);
  CHECK(t.label == "ours");
  CHECK(std::string(slurp(path)).rfind("task_id,mode,family,mse_pre,mse_post\n", 0) == 0);
}

// ---- compare ----

void write_run(const fs::path& path, const RunConfig& cfg, const std::string& label) {
  const auto records = evaluate(init_model(cfg), cfg);
  write_eval_records(path.string(), records);
  write_eval_summary(summary_path(path.string()), summarize(records, cfg, label));
}

TEST_CASE("comparison keeps input order and reproduces each run's statistics") {
  const fs::path dir = scratch("compare");
  const RunConfig ours = small_config();
  const RunConfig maml = small_config(Algorithm::kMaml);
  write_run(dir / "ours.csv", ours, "ours");
  write_run(dir / "maml.csv", maml, "maml");
  const ComparisonTable t = compare_runs({(dir / "maml.csv").string(), (dir / "ours.csv").string()});
  CHECK(t.rows == std::vector<std::string>{"maml", "ours"});
  REQUIRE(t.columns.size() == 1);
  const EvalSummary direct = summarize(evaluate(init_model(ours), ours), ours, "ours");
  CHECK(std::abs(t.cells[1].at(t.columns[0]).mean_post - direct.mean_post) <= 1e-12);

  const std::string csv = table_csv(t);
  CHECK(csv.rfind("label,variant,dependence,n,mean_post,ci_post,mean_pre,ci_pre\n", 0) == 0);
  CHECK(!format_table(t).empty());
}

TEST_CASE("comparing a run with itself gives identical rows") {
  const fs::path dir = scratch("compare_self");
  write_run(dir / "a.csv", small_config(), "ours");
  const ComparisonTable t = compare_runs({(dir / "a.csv").string(), (dir / "a.csv").string()});
  REQUIRE(t.rows.size() == 2);
  const std::string col = t.columns[0];
  CHECK(t.cells[0].at(col).mean_post == t.cells[1].at(col).mean_post);
  CHECK(t.cells[0].at(col).ci_post == t.cells[1].at(col).ci_post);
}

TEST_CASE("comparison rejects mismatched eval seeds and single inputs") {
  const fs::path dir = scratch("compare_bad");
  RunConfig a = small_config();
  RunConfig b = small_config();
  b.eval_seed = 99;
  write_run(dir / "a.csv", a, "a");
  write_run(dir / "b.csv", b, "b");
  CHECK_THROWS(compare_runs({(dir / "a.csv").string(), (dir / "b.csv").string()}));
  CHECK_THROWS(compare_runs({(dir / "a.csv").string()}));
}

// ---- gradcheck ----

TEST_CASE("gradient-check battery passes on the miniature config") {
  const GradcheckReport r = run_gradcheck(preset("miniature"));
  CHECK(r.passed);
  for (const GradcheckCase& c : r.cases) {
    if (!c.expected_divergent) CHECK_MESSAGE(c.worst <= 1e-4, c.name << " worst " << c.worst);
  }
}

// ---- command-line tool ----

int run_cli(const std::string& args) {
  const std::string cmd = std::string(COVMETA_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_CASE("command-line exit codes") {
  const fs::path dir = scratch("cli");
  const std::string data = (dir / "d.bin").string();
  const std::string common = " --preset miniature --num_tasks 6 --epochs 1 --eval_tasks 5 --output_dir " + dir.string();
  CHECK(run_cli("gen" + common + " --out " + data) == 0);
  CHECK(run_cli("train" + common + " --data " + data + " --quiet") == 0);
  CHECK(fs::exists(dir / "final.ckpt"));
  CHECK(fs::exists(dir / "train_log.ndjson"));
  CHECK(run_cli("eval --checkpoint " + (dir / "final.ckpt").string() + " --out " + (dir / "e.csv").string()) == 0);
  CHECK(run_cli("compare " + (dir / "e.csv").string() + " " + (dir / "e.csv").string()) == 0);
  CHECK(run_cli("gradcheck") == 0);
  CHECK(run_cli("gen --num_tasks 0 --out " + data) == 1);
  CHECK(run_cli("train --no-such-flag 1") == 1);
  CHECK(run_cli("eval --checkpoint " + (dir / "missing.ckpt").string()) != 0);
  CHECK(run_cli("compare " + (dir / "e.csv").string()) == 1);
}

}  // namespace
}  // namespace covmeta
