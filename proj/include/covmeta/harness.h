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

// Experiment orchestration behind the command-line tool: dataset generation,
// training, evaluation, comparison tables and the gradient-check battery.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "covmeta/checkpoint.h"
#include "covmeta/config.h"
#include "covmeta/taskgen.h"

namespace covmeta {

// ---- gen ----

MetaDistribution meta_distribution_of(const RunConfig& cfg);
Dataset generate_training_set(const RunConfig& cfg);
// Human-readable summary: variant, dependence, mode table, counts.
void print_dataset_summary(std::ostream& os, const DatasetManifest& m);

// ---- train ----

struct StepLog {
  std::uint64_t step = 0;  // 1-based count of completed outer steps
  std::uint64_t epoch = 0;
  LossBreakdown loss;
};
nlohmann::json to_json(const StepLog& s);

struct TrainOptions {
  // Stop once this many outer steps are complete (checkpointing there).
  std::optional<std::uint64_t> stop_after;
  // One NDJSON line per outer step.
  std::ostream* log = nullptr;
  // Periodic and final checkpoints under cfg.output_dir.
  bool write_checkpoints = false;
  std::function<void(const StepLog&)> on_step;
};

// Throws std::invalid_argument when the dataset was not generated for cfg.
void check_dataset_compatible(const RunConfig& cfg, const DatasetManifest& m);

std::uint64_t steps_per_epoch(const RunConfig& cfg, std::size_t num_tasks);
std::uint64_t total_steps(const RunConfig& cfg, std::size_t num_tasks);
// Task order for one epoch; a pure function of (seed, epoch).
std::vector<std::size_t> epoch_order(std::uint64_t seed, std::uint64_t epoch, std::size_t n);

// Runs outer steps from model.step up to the schedule end (or stop_after).
// A non-finite value aborts with NumericalError naming the step.
ModelState train(const RunConfig& cfg, const Dataset& ds, ModelState model, const TrainOptions& opts = {});

std::string checkpoint_path(const RunConfig& cfg, std::uint64_t step);
std::string final_checkpoint_path(const RunConfig& cfg);

// ---- eval ----

struct EvalRecord {
  std::size_t task_id = 0;
  std::size_t mode = 0;
  Family family = Family::kSine;
  double mse_pre = 0.0;
  double mse_post = 0.0;
};

struct EvalSummary {
  std::string label;
  Variant variant = Variant::kSine;
  Dependence dependence = Dependence::kDependent;
  std::uint64_t data_seed = 0;
  std::uint64_t eval_seed = 0;
  std::size_t n = 0;
  double mean_pre = 0.0;
  double ci_pre = 0.0;
  double mean_post = 0.0;
  double ci_post = 0.0;
};

// Fresh tasks from the eval seed over the training modes; adapts on the
// support set and scores both initial and adapted networks on the query set
// against noiseless targets. `cfg` supplies K, inner rate and eval sizes.
std::vector<EvalRecord> evaluate(const ModelState& model, const RunConfig& cfg);

// Mean and normal-approximation 95% half-width 1.96 s / sqrt(N).
std::pair<double, double> mean_and_ci(const std::vector<double>& v);
EvalSummary summarize(const std::vector<EvalRecord>& records, const RunConfig& cfg, const std::string& label);

// CSV header: task_id,mode,family,mse_pre,mse_post.
void write_eval_records(const std::string& path, const std::vector<EvalRecord>& records);
std::vector<EvalRecord> read_eval_records(const std::string& path);
// Sidecar next to the records file: <records>.summary.json.
std::string summary_path(const std::string& records_path);
void write_eval_summary(const std::string& path, const EvalSummary& s);
EvalSummary read_eval_summary(const std::string& path);

// ---- compare ----

struct ComparisonTable {
  std::vector<std::string> columns;  // "variant/dependence"
  std::vector<std::string> rows;     // labels, in input order
  // cells[row][column]: (mean, ci, n); missing cells are absent.
  std::vector<std::map<std::string, EvalSummary>> cells;
};

// Summaries are recomputed from each records file; eval seeds must agree.
ComparisonTable compare_runs(const std::vector<std::string>& records_paths);
std::string format_table(const ComparisonTable& t);
// label,variant,dependence,n,mean_post,ci_post,mean_pre,ci_pre
std::string table_csv(const ComparisonTable& t);

// ---- gradcheck ----

struct GradcheckCase {
  std::string name;
  double worst = 0.0;
  std::map<std::string, double> per_component;
  bool expected_divergent = false;
  bool passed = false;
  std::string note;
};

struct GradcheckReport {
  std::vector<GradcheckCase> cases;
  bool passed = true;
};

// Finite-difference battery on a miniature config (`cfg.mode` selects the
// inner-gradient mode for the main-method cases).
GradcheckReport run_gradcheck(const RunConfig& cfg, double tolerance = 1e-4);
void print_gradcheck_report(std::ostream& os, const GradcheckReport& r);

}  // namespace covmeta
