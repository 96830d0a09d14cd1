#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "derl/config.hpp"
#include "derl/errors.hpp"
#include "derl/harness.hpp"
#include "derl/report.hpp"

namespace fs = std::filesystem;
using namespace derl;

namespace {

struct Job {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  std::string point;
};

ExperimentConfig resolve(const std::string& config_path, const std::vector<std::string>& sets) {
  Overrides overrides;
  for (const auto& s : sets) overrides.push_back(parse_assignment(s));
  return config_path.empty() ? parse_config("", overrides) : load_config(config_path, overrides);
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--seeds: not a seed: '" + item + "'");
    }
  }
  if (seeds.empty()) throw UsageError("--seeds: empty list");
  return seeds;
}

// Runs every job, at most `parallel` at a time; returns the number aborted.
int run_jobs(const std::vector<Job>& jobs, const std::string& outdir, int parallel, bool wall_time) {
  std::atomic<std::size_t> next{0};
  std::atomic<int> aborted{0};
  std::mutex io;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      const fs::path dir = run_directory(outdir, job.config, job.seed, job.point);
      fs::create_directories(dir);
      const auto proto = make_env(job.config.env);
      const SnapshotMeta meta{job.seed, solve_optimal_return(*proto)};
      std::ofstream(dir / "config.snapshot") << emit_config(job.config, &meta);
      RunOptions options;
      options.csv_path = (dir / "run.csv").string();
      options.record_wall_time = wall_time;
      const RunLog log = run_experiment(job.config, job.seed, options);
      std::lock_guard<std::mutex> lock(io);
      if (log.aborted) {
        ++aborted;
        std::cerr << dir.string() << ": aborted: " << log.error << "\n";
      } else {
        std::cerr << dir.string() << ": max " << format_double(log.max_eval_return()) << " mean "
                  << format_double(log.mean_eval_return()) << "\n";
      }
    }
  };
  const int n = std::max(1, std::min<int>(parallel, static_cast<int>(jobs.size())));
  std::vector<std::thread> threads;
  for (int t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  return aborted.load();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decoupled exploration and exploitation experiments"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::string outdir = "runs";
  std::uint64_t seed = 0;
  std::string seeds_text;
  int parallel = 1;
  bool wall_time = false;
  std::string sweep_kind;
  std::string report_dir;
  std::string report_out;
  int resamples = 5000;
  double level = 0.95;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", sets, "key=value override (repeatable)")->take_all();
  };

  auto* train = app.add_subcommand("train", "Train and evaluate one run");
  add_config(train);
  train->add_option("--seed", seed, "Run seed");
  train->add_option("--outdir", outdir, "Output root");
  train->add_flag("--wall-time", wall_time, "Log elapsed seconds (breaks byte-identical reruns)");

  auto* sweep = app.add_subcommand("sweep", "Run a grid of seeds, optionally over a sensitivity sweep");
  add_config(sweep);
  sweep->add_option("--kind", sweep_kind, "lambda or decay; omit to run the base config only");
  sweep->add_option("--seeds", seeds_text, "Comma-separated seeds (default: schedule.seeds)");
  sweep->add_option("--outdir", outdir, "Output root");
  sweep->add_option("--parallel", parallel, "Concurrent runs")->check(CLI::PositiveNumber);
  sweep->add_flag("--wall-time", wall_time, "Log elapsed seconds");

  auto* report = app.add_subcommand("report", "Aggregate a run directory");
  report->add_option("dir", report_dir, "Run directory")->required();
  report->add_option("--out", report_out, "Where to write summary.csv and normalized.csv (default: dir)");
  report->add_option("--resamples", resamples, "Bootstrap resamples")->check(CLI::PositiveNumber);
  report->add_option("--level", level, "Confidence level")->check(CLI::Range(0.0, 1.0));
  report->add_option("--seed", seed, "Bootstrap seed");

  auto* solve = app.add_subcommand("solve", "Print the optimal return of the configured environment");
  add_config(solve);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const ExperimentConfig cfg = resolve(config_path, sets);
      return run_jobs({{cfg, seed, ""}}, outdir, 1, wall_time) == 0 ? 0 : 1;
    }
    if (sweep->parsed()) {
      const ExperimentConfig base = resolve(config_path, sets);
      const std::vector<std::uint64_t> seeds = seeds_text.empty() ? base.schedule.seeds : parse_seeds(seeds_text);
      std::vector<Job> jobs;
      if (sweep_kind.empty()) {
        for (auto s : seeds) jobs.push_back({base, s, ""});
      } else {
        for (const auto& point : generate_sweep(parse_sweep_kind(sweep_kind), base))
          for (auto s : seeds) jobs.push_back({point.config, s, point.label});
      }
      const int aborted = run_jobs(jobs, outdir, parallel, wall_time);
      if (aborted > 0) std::cerr << aborted << " of " << jobs.size() << " runs aborted\n";
      return aborted == 0 ? 0 : 1;
    }
    if (report->parsed()) {
      const Report r = aggregate_report(report_dir, {resamples, level, seed});
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      const fs::path out = report_out.empty() ? fs::path(report_dir) : fs::path(report_out);
      fs::create_directories(out);
      std::ofstream summary(out / "summary.csv");
      write_summary_csv(summary, r);
      std::ofstream normalized(out / "normalized.csv");
      write_normalized_csv(normalized, r);
      write_summary_csv(std::cout, r);
      return 0;
    }
    if (solve->parsed()) {
      const ExperimentConfig cfg = resolve(config_path, sets);
      std::cout << std::setprecision(10) << solve_optimal_return(*make_env(cfg.env)) << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
