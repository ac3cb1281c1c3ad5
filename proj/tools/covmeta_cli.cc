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

// covmeta: gen | train | eval | compare | gradcheck.
//
// Exit status: 0 success, 1 validation error, 2 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "covmeta/binary_io.h"
#include "covmeta/config.h"
#include "covmeta/dataset_io.h"
#include "covmeta/harness.h"

namespace {

using namespace covmeta;

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kNumerical = 2;

// --preset, --config and one flag per RunConfig key, applied in that order.
struct ConfigFlags {
  std::string preset_name = "default";
  std::string config_path;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* app, bool with_preset = true) {
    if (with_preset) app->add_option("--preset", preset_name, "Named preset: default, mmaml-lite, workshop, miniature");
    app->add_option("--config", config_path, "JSON config file (unknown keys are errors)");
    const nlohmann::json keys = to_json(RunConfig{});
    for (const auto& [key, value] : keys.items()) {
      (void)value;
      std::string dashed = key;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      std::string names = "--" + key;
      if (dashed != key) names += ",--" + dashed;
      app->add_option_function<std::string>(
          names, [this, key = key](const std::string& v) { overrides[key] = v; }, "Override config key '" + key + "'");
    }
  }

  // Flag values are read as JSON when they parse, as strings otherwise.
  nlohmann::json overlay() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, text] : overrides) {
      nlohmann::json v = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
      j[key] = v.is_discarded() ? nlohmann::json(text) : v;
    }
    return j;
  }

  RunConfig resolve(std::optional<RunConfig> base = std::nullopt) const {
    RunConfig cfg = base ? *base : preset(preset_name);
    if (!config_path.empty()) cfg = load_config(config_path, cfg);
    return config_from_json(overlay(), cfg);
  }
};

std::string default_dataset_path(const RunConfig& cfg) {
  return (std::filesystem::path(cfg.output_dir) / "dataset.bin").string();
}

int run_gen(const ConfigFlags& flags, std::string out) {
  const RunConfig cfg = flags.resolve();
  if (out.empty()) out = default_dataset_path(cfg);
  const auto parent = std::filesystem::path(out).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  const Dataset ds = generate_training_set(cfg);
  write_dataset(out, ds);
  print_dataset_summary(std::cout, ds.manifest);
  std::cout << "wrote " << out << "\n";
  return kOk;
}

int run_train(const ConfigFlags& flags, std::string data, const std::string& resume, std::optional<std::uint64_t> stop,
              bool quiet) {
  ModelState model;
  RunConfig cfg;
  if (!resume.empty()) {
    const Checkpoint ck = load_checkpoint(resume);
    cfg = flags.resolve(ck.config);
    model = ck.model;
  } else {
    cfg = flags.resolve();
    model = init_model(cfg);
  }
  if (data.empty()) data = default_dataset_path(cfg);
  const Dataset ds = read_dataset(data);
  std::filesystem::create_directories(cfg.output_dir);
  save_config((std::filesystem::path(cfg.output_dir) / "config.json").string(), cfg);
  const std::string log_path = (std::filesystem::path(cfg.output_dir) / "train_log.ndjson").string();
  std::ofstream log(log_path, resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw std::runtime_error("cannot open '" + log_path + "' for writing");

  TrainOptions opts;
  opts.log = &log;
  opts.stop_after = stop;
  opts.write_checkpoints = true;
  const std::uint64_t total = total_steps(cfg, ds.tasks.size());
  if (!quiet) {
    opts.on_step = [total](const StepLog& s) {
      if (s.step % 100 == 0 || s.step == total) {
        std::cerr << "step " << s.step << "/" << total << " total " << s.loss.total << " task_nll " << s.loss.task_nll
                  << "\n";
      }
    };
  }
  model = train(cfg, ds, std::move(model), opts);
  std::cout << "trained " << to_string(cfg.algorithm) << " for " << model.step << " steps; log " << log_path << "\n";
  std::cout << "checkpoint "
            << (model.step == total ? final_checkpoint_path(cfg) : checkpoint_path(cfg, model.step)) << "\n";
  return kOk;
}

int run_eval(const ConfigFlags& flags, const std::string& checkpoint, std::string out, std::string label) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const RunConfig cfg = flags.resolve(ck.config);
  if (out.empty()) out = (std::filesystem::path(cfg.output_dir) / "eval_records.csv").string();
  if (label.empty()) label = to_string(cfg.algorithm);
  const auto parent = std::filesystem::path(out).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  const auto records = evaluate(ck.model, cfg);
  write_eval_records(out, records);
  const EvalSummary s = summarize(records, cfg, label);
  write_eval_summary(summary_path(out), s);
  std::cout << label << " " << to_string(cfg.variant) << "/" << to_string(cfg.dependence) << ": " << s.n
            << " tasks, post-adaptation MSE " << s.mean_post << " +- " << s.ci_post << " (pre " << s.mean_pre << " +- "
            << s.ci_pre << ")\n";
  std::cout << "wrote " << out << "\n";
  return kOk;
}

int run_compare(const std::vector<std::string>& files, const std::string& csv) {
  const ComparisonTable t = compare_runs(files);
  std::cout << format_table(t);
  const std::string text = table_csv(t);
  if (csv.empty()) {
    std::cout << "\n" << text;
  } else {
    std::ofstream os(csv, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + csv + "' for writing");
    os << text;
    std::cout << "wrote " << csv << "\n";
  }
  return kOk;
}

int run_gradcheck_cmd(ConfigFlags flags, double tolerance) {
  const RunConfig cfg = flags.resolve();
  const GradcheckReport r = run_gradcheck(cfg, tolerance);
  print_gradcheck_report(std::cout, r);
  return r.passed ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covariate-aware meta-learning for few-shot regression"};
  app.require_subcommand(1);

  ConfigFlags gen_flags, train_flags, eval_flags, check_flags;
  check_flags.preset_name = "miniature";

  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Generate a training task set");
  gen_flags.attach(gen);
  gen->add_option("--out", gen_out, "Dataset file (default <output_dir>/dataset.bin)");

  std::string data, resume;
  std::optional<std::uint64_t> stop_after;
  bool quiet = false;
  auto* train_cmd = app.add_subcommand("train", "Meta-train on a dataset file");
  train_flags.attach(train_cmd);
  train_cmd->add_option("--data", data, "Dataset file (default <output_dir>/dataset.bin)");
  train_cmd->add_option("--resume", resume, "Continue from a checkpoint");
  train_cmd->add_option("--stop-after", stop_after, "Stop after this many outer steps");
  train_cmd->add_flag("--quiet", quiet, "No progress on stderr");

  std::string checkpoint, eval_out, label;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on fresh tasks");
  eval_flags.attach(eval_cmd, /*with_preset=*/false);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate")->required();
  eval_cmd->add_option("--out", eval_out, "Records CSV (default <output_dir>/eval_records.csv)");
  eval_cmd->add_option("--label", label, "Row label for compare (default: algorithm)");

  std::vector<std::string> files;
  std::string csv;
  auto* compare_cmd = app.add_subcommand("compare", "Tabulate eval record files");
  compare_cmd->add_option("files", files, "Eval record CSV files")->required();
  compare_cmd->add_option("--csv", csv, "Write the CSV table here");

  double tolerance = 1e-4;
  auto* check_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the meta-gradients");
  check_flags.attach(check_cmd);
  check_cmd->add_option("--tolerance", tolerance, "Maximum relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*gen) return run_gen(gen_flags, gen_out);
    if (*train_cmd) return run_train(train_flags, data, resume, stop_after, quiet);
    if (*eval_cmd) return run_eval(eval_flags, checkpoint, eval_out, label);
    if (*compare_cmd) return run_compare(files, csv);
    if (*check_cmd) return run_gradcheck_cmd(check_flags, tolerance);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kValidation;
}
