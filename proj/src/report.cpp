#include "derl/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "derl/errors.hpp"

namespace derl {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, const std::string& where) {
  double x = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty())
    throw ConfigError(where + ": not a number: '" + s + "'");
  return x;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

std::string csv_number(double x) { return std::isnan(x) ? std::string() : format_double(x); }

}  // namespace

std::vector<EvalRecord> read_run_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  const auto header = split(line);
  const int columns = static_cast<int>(header.size());
  const int eval_episodes = columns - 8;
  if (eval_episodes < 1 || line != csv_header(eval_episodes)) throw ConfigError(path + ": unexpected header");

  std::vector<EvalRecord> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line);
    const std::string where = path + ":" + std::to_string(line_no);
    if (static_cast<int>(f.size()) != columns) throw ConfigError(where + ": expected " + std::to_string(columns) + " fields");
    EvalRecord r;
    const double episode = to_double(f[0], where);
    if (episode < 0 || episode != std::floor(episode)) throw ConfigError(where + ": bad episode");
    r.episode = static_cast<std::int64_t>(episode);
    r.mean = to_double(f[1], where);
    r.std = to_double(f[2], where);
    for (int i = 0; i < eval_episodes; ++i) r.returns.push_back(to_double(f[static_cast<std::size_t>(3 + i)], where));
    std::size_t c = static_cast<std::size_t>(3 + eval_episodes);
    r.train_return_mean = to_double(f[c++], where);
    r.intrinsic_mean = to_double(f[c++], where);
    r.is_weight_mean = to_double(f[c++], where);
    r.kl_mean = to_double(f[c++], where);
    r.wall_s = to_double(f[c], where);
    if (!std::isfinite(r.mean)) throw ConfigError(where + ": non-finite return");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ConfigError(path + ": no evaluations");
  return rows;
}

Report aggregate_report(const std::string& directory, const ReportOptions& options) {
  Report report;
  const fs::path root(directory);
  if (!fs::is_directory(root)) throw UsageError("report: not a directory: " + directory);

  // (task, cell) -> seed directories, in path order.
  std::map<std::pair<std::string, std::string>, std::vector<fs::path>> cells;
  std::vector<fs::path> seed_dirs;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    bool has_subdir = false;
    for (const auto& child : fs::directory_iterator(entry.path())) {
      if (child.is_directory()) {
        has_subdir = true;
        break;
      }
    }
    if (!has_subdir) seed_dirs.push_back(entry.path());
  }
  std::sort(seed_dirs.begin(), seed_dirs.end());
  for (const auto& dir : seed_dirs) {
    const fs::path rel = fs::relative(dir, root);
    std::vector<std::string> parts;
    for (const auto& p : rel) parts.push_back(p.string());
    if (parts.size() < 3) {
      report.warnings.push_back(dir.string() + ": not a <task>/<cell>/<seed> directory, skipped");
      continue;
    }
    std::string cell = parts[1];
    for (std::size_t i = 2; i + 1 < parts.size(); ++i) cell += "/" + parts[i];
    cells[{parts[0], cell}].push_back(dir);
  }

  for (const auto& [key, dirs] : cells) {
    CellSummary s;
    s.task = key.first;
    s.cell = key.second;
    for (const auto& dir : dirs) {
      const fs::path csv = dir / "run.csv";
      if (!fs::exists(csv)) {
        report.warnings.push_back(csv.string() + ": missing, skipped");
        continue;
      }
      try {
        s.runs.push_back({dir.filename().string(), read_run_csv(csv.string())});
      } catch (const ConfigError& e) {
        report.warnings.push_back(std::string(e.what()) + ", skipped");
      }
    }
    if (s.runs.empty()) {
      report.warnings.push_back(s.task + "/" + s.cell + ": no readable runs, skipped");
      continue;
    }
    std::vector<std::vector<double>> per_seed;
    std::vector<double> seed_means;
    std::vector<double> seed_maxima;
    for (const auto& run : s.runs) {
      std::vector<double> values;
      for (const auto& r : run.evals) values.push_back(r.mean);
      seed_means.push_back(mean_of(values));
      seed_maxima.push_back(*std::max_element(values.begin(), values.end()));
      per_seed.push_back(std::move(values));
    }
    s.mean = mean_of(seed_means);
    s.std = population_std(seed_means);
    s.max = *std::max_element(seed_maxima.begin(), seed_maxima.end());
    s.max_mean = mean_of(seed_maxima);
    s.max_std = population_std(seed_maxima);
    std::tie(s.ci_low, s.ci_high) = stratified_bootstrap_ci(per_seed, options.resamples, options.level, options.seed);
    report.cells.push_back(std::move(s));
  }

  for (const auto& c : report.cells) {
    if (std::find(report.tasks.begin(), report.tasks.end(), c.task) == report.tasks.end())
      report.tasks.push_back(c.task);
    if (std::find(report.cell_names.begin(), report.cell_names.end(), c.cell) == report.cell_names.end())
      report.cell_names.push_back(c.cell);
  }
  std::sort(report.cell_names.begin(), report.cell_names.end());

  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::size_t n_cells = report.cell_names.size();
  std::vector<double> sums(n_cells, 0.0);
  std::vector<int> counts(n_cells, 0);
  for (const auto& task : report.tasks) {
    std::vector<double> values;
    std::vector<std::size_t> where;
    for (const auto& c : report.cells) {
      if (c.task != task) continue;
      const auto it = std::find(report.cell_names.begin(), report.cell_names.end(), c.cell);
      where.push_back(static_cast<std::size_t>(it - report.cell_names.begin()));
      values.push_back(c.mean);
    }
    const NormalizedReturns n = normalize_returns({values});
    std::vector<double> row(n_cells, nan);
    for (std::size_t i = 0; i < where.size(); ++i) {
      row[where[i]] = n.values[0][i];
      sums[where[i]] += n.values[0][i];
      ++counts[where[i]];
    }
    report.normalized.push_back(std::move(row));
    report.degenerate.push_back(n.degenerate[0]);
    if (n.degenerate[0]) report.warnings.push_back(task + ": all cells tied, normalized to 0.5");
  }
  for (std::size_t j = 0; j < n_cells; ++j)
    report.normalized_mean.push_back(counts[j] > 0 ? sums[j] / counts[j] : nan);
  return report;
}

void write_summary_csv(std::ostream& out, const Report& report) {
  out << "task,cell,seeds,evaluations,mean,std,max,max_mean,max_std,ci_low,ci_high\n";
  for (const auto& c : report.cells) {
    std::size_t evals = 0;
    for (const auto& r : c.runs) evals += r.evals.size();
    out << c.task << ',' << c.cell << ',' << c.runs.size() << ',' << evals << ',' << format_double(c.mean) << ','
        << format_double(c.std) << ',' << format_double(c.max) << ',' << format_double(c.max_mean) << ','
        << format_double(c.max_std) << ',' << format_double(c.ci_low) << ',' << format_double(c.ci_high) << '\n';
  }
}

void write_normalized_csv(std::ostream& out, const Report& report) {
  out << "cell";
  for (const auto& t : report.tasks) out << ',' << t;
  out << ",mean\n";
  for (std::size_t j = 0; j < report.cell_names.size(); ++j) {
    out << report.cell_names[j];
    for (std::size_t t = 0; t < report.tasks.size(); ++t) out << ',' << csv_number(report.normalized[t][j]);
    out << ',' << csv_number(report.normalized_mean[j]) << '\n';
  }
}

}  // namespace derl
