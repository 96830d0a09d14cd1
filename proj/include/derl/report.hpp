#pragma once

// Aggregation of run directories laid out as
// OUTDIR/<task>/<cell>[/<point>]/<seed>/run.csv into summary tables.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "derl/harness.hpp"

namespace derl {

/// Parses a run CSV. Throws ConfigError on a malformed header or row.
std::vector<EvalRecord> read_run_csv(const std::string& path);

struct SeedRun {
  std::string seed;
  std::vector<EvalRecord> evals;
};

struct CellSummary {
  std::string task;
  std::string cell;  // "<algo>-<intrinsic>[/<point>]"
  std::vector<SeedRun> runs;
  double mean = 0.0;      // mean over evaluations of the seed-mean return
  double std = 0.0;       // population std over seeds of each seed's mean
  double max = 0.0;       // best evaluation of any seed
  double max_mean = 0.0;  // per-seed maximum, averaged over seeds
  double max_std = 0.0;
  double ci_low = 0.0;  // stratified bootstrap over seeds
  double ci_high = 0.0;
};

struct Report {
  std::vector<CellSummary> cells;
  std::vector<std::string> tasks;
  std::vector<std::string> cell_names;
  /// [task][cell]; a cell absent from a task is excluded from that task's
  /// min-max range and from its own cross-task mean.
  std::vector<std::vector<double>> normalized;
  std::vector<bool> degenerate;
  std::vector<double> normalized_mean;  // per cell
  std::vector<std::string> warnings;
};

struct ReportOptions {
  int resamples = 5000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

/// Scans a run directory. Missing or corrupt run files are skipped and noted
/// in warnings.
Report aggregate_report(const std::string& directory, const ReportOptions& options = {});

void write_summary_csv(std::ostream& out, const Report& report);
void write_normalized_csv(std::ostream& out, const Report& report);

}  // namespace derl
