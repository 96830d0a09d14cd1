#pragma once

// Run orchestration: the K-lane training loop with episode-based evaluation
// schedule, greedy evaluation, result logging, and the statistics used to
// summarize runs (stratified bootstrap, min-max normalization).

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "derl/config.hpp"

namespace derl {

struct EvalRecord {
  std::int64_t episode = 0;
  std::vector<double> returns;
  double mean = 0.0;
  double std = 0.0;  // population
  // Means over the window since the previous evaluation.
  double train_return_mean = 0.0;
  double intrinsic_mean = 0.0;
  double is_weight_mean = 1.0;
  double kl_mean = 0.0;
  double wall_s = 0.0;
};

struct RunLog {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  double optimal_return = 0.0;
  std::vector<EvalRecord> evals;
  std::vector<double> train_returns;  // extrinsic return of every completed training episode
  std::int64_t episodes = 0;
  bool aborted = false;
  std::string error;

  double max_eval_return() const;
  double mean_eval_return() const;
};

struct RunOptions {
  /// CSV destination, written row by row; empty for none.
  std::string csv_path;
  /// Fill wall_s with elapsed seconds. Off by default so that a rerun with
  /// the same config and seed reproduces the CSV byte for byte.
  bool record_wall_time = false;
  bool keep_train_returns = false;
  std::function<void(const EvalRecord&)> on_eval;
};

using GreedyPolicy = std::function<int(const Vec&)>;

/// Undiscounted extrinsic returns of `episodes` greedy episodes, each in a
/// fresh environment seeded from (run_seed, eval_index, episode).
std::vector<double> evaluate_greedy(const GreedyPolicy& policy, const EnvSpec& env, int episodes,
                                    std::uint64_t run_seed, std::int64_t eval_index = 0);

/// Builds the learner a config names.
std::unique_ptr<Trainer> make_trainer(const ExperimentConfig& cfg, int observation_size, int num_actions,
                                      std::uint64_t seed);

/// Trains and evaluates one (config, seed). Component errors abort the run:
/// rows written so far stay on disk and the log is marked aborted.
RunLog run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, const RunOptions& options = {});

std::string csv_header(int eval_episodes);
std::string csv_row(const EvalRecord& r);
void write_csv_row(std::ostream& out, const EvalRecord& r);

/// OUTDIR/<task>/<algo>-<intrinsic>[/<point>]/<seed>
std::string run_directory(const std::string& outdir, const ExperimentConfig& cfg, std::uint64_t seed,
                          const std::string& point = "");

/// Type-7 (linear interpolation) empirical quantile of unsorted data.
double quantile(std::vector<double> values, double q);

/// Bootstrap CI of the mean of per-stratum means: each resample draws every
/// stratum's values with replacement within that stratum.
std::pair<double, double> stratified_bootstrap_ci(const std::vector<std::vector<double>>& per_seed_values,
                                                  int resamples = 5000, double level = 0.95,
                                                  std::uint64_t seed = 0);

struct NormalizedReturns {
  std::vector<std::vector<double>> values;  // [task][algorithm] in [0, 1]
  std::vector<bool> degenerate;             // per task: every algorithm tied
  std::vector<double> mean;                 // per algorithm, over tasks
};

/// Per-task min-max rescaling of algorithm means, then cross-task averages.
/// A task whose values are all equal maps to 0.5 and is flagged.
NormalizedReturns normalize_returns(const std::vector<std::vector<double>>& per_task_values);

}  // namespace derl
