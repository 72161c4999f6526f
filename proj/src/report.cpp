#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "monosched/harness.hpp"

namespace monosched {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Rows keyed by the first column, header dropped.
std::map<std::string, std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ComparabilityError("missing " + path.string());
  std::map<std::string, std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    rows[cells.front()] = std::move(cells);
  }
  return rows;
}

struct Accumulator {
  std::vector<double> values;
  void add(double x) { values.push_back(x); }
  double mean() const {
    if (values.empty()) return 0.0;
    double s = 0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
  }
  // Sample standard deviation; 0 for fewer than two values.
  double stddev() const {
    if (values.size() < 2) return 0.0;
    const double m = mean();
    double s = 0;
    for (double v : values) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(values.size() - 1));
  }
};

}  // namespace

double final_average(const std::vector<double>& curve, int tail) {
  if (curve.empty()) throw std::invalid_argument("final_average: empty curve");
  const std::size_t k = std::min(curve.size(), static_cast<std::size_t>(std::max(tail, 1)));
  double s = 0;
  for (std::size_t i = curve.size() - k; i < curve.size(); ++i) s += curve[i];
  return s / static_cast<double>(k);
}

std::optional<int> episodes_to_convergence(const std::vector<double>& curve, int window, int tail, double rel) {
  if (window < 1 || tail < 1 || !(rel >= 0)) throw std::invalid_argument("episodes_to_convergence: bad parameters");
  if (curve.size() < static_cast<std::size_t>(window)) return std::nullopt;
  const double target = final_average(curve, tail);
  double sum = 0;
  for (std::size_t e = 0; e < curve.size(); ++e) {
    sum += curve[e];
    if (e >= static_cast<std::size_t>(window)) sum -= curve[e - window];
    if (e + 1 < static_cast<std::size_t>(window)) continue;
    const double avg = sum / window;
    if (std::abs(avg - target) <= rel * std::abs(target)) return static_cast<int>(e) + 1;
  }
  return std::nullopt;
}

std::vector<ComparisonRow> compare_report(const std::vector<std::filesystem::path>& run_dirs,
                                          bool include_baselines) {
  if (run_dirs.size() < 2) throw ComparabilityError("compare needs at least two runs");
  std::string reference;
  std::vector<std::string> order;
  std::map<std::string, Accumulator> seconds, nec, final_cost, eval_cost;
  std::map<std::string, int> runs, converged;

  for (const auto& dir : run_dirs) {
    ExperimentConfig config;
    try {
      config = load_config(dir / "config.json");
    } catch (const ConfigError& e) {
      throw ComparabilityError(dir.string() + ": unreadable config (" + e.what() + ")");
    }
    config.seed = 0;
    const std::string key = to_json(config);
    if (reference.empty()) {
      reference = key;
    } else if (key != reference) {
      throw ComparabilityError(dir.string() + ": config differs from " + run_dirs.front().string() +
                               " beyond the seed");
    }
    const auto summary = read_csv(dir / "summary.csv");
    const auto timing = read_csv(dir / "timing.csv");
    for (const auto& [name, cells] : summary) {
      const bool is_baseline = name == "random_feasible" || name == "greedy_aoi";
      if (is_baseline && !include_baselines) continue;
      if (cells.size() < 5) throw ComparabilityError(dir.string() + ": malformed summary row for " + name);
      if (!runs.count(name)) order.push_back(name);
      ++runs[name];
      if (!cells[1].empty()) {
        ++converged[name];
        nec[name].add(std::stod(cells[1]));
      }
      final_cost[name].add(std::stod(cells[2]));
      eval_cost[name].add(std::stod(cells[3]));
      const auto t = timing.find(name);
      seconds[name].add(t != timing.end() && t->second.size() > 1 ? std::stod(t->second[1]) : 0.0);
    }
  }

  std::vector<ComparisonRow> rows;
  for (const std::string& name : order) {
    ComparisonRow r;
    r.variant = name;
    r.runs = runs[name];
    r.seconds_mean = seconds[name].mean();
    r.seconds_std = seconds[name].stddev();
    r.nec_converged = converged[name];
    r.nec_mean = nec[name].mean();
    r.nec_std = nec[name].stddev();
    r.final_cost_mean = final_cost[name].mean();
    r.final_cost_std = final_cost[name].stddev();
    r.eval_cost_mean = eval_cost[name].mean();
    r.eval_cost_std = eval_cost[name].stddev();
    rows.push_back(r);
  }
  return rows;
}

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows) {
  const auto old = out.precision(6);
  out << "variant,runs,train_seconds_per_episode_mean,train_seconds_per_episode_std,nec_converged,nec_mean,nec_std,"
         "final_avg_cost_mean,final_avg_cost_std,eval_avg_cost_mean,eval_avg_cost_std\n";
  for (const ComparisonRow& r : rows) {
    out << r.variant << ',' << r.runs << ',' << r.seconds_mean << ',' << r.seconds_std << ',' << r.nec_converged
        << ',';
    if (r.nec_converged > 0) out << r.nec_mean << ',' << r.nec_std;
    else out << ',';
    out << ',' << r.final_cost_mean << ',' << r.final_cost_std << ',' << r.eval_cost_mean << ','
        << r.eval_cost_std << '\n';
  }
  out.precision(old);
}

}  // namespace monosched
