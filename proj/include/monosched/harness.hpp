#pragma once

// Experiment plumbing: JSON configs and presets, system generation from a
// master seed, heuristic baselines, end-to-end runs with CSV artifacts, and
// cross-seed comparison tables.
//
// Seed fan-out: every component draws from make_stream(seed, Stream::k...),
// so each RNG can be varied independently of the others. All variants of one
// run see the same processes and channel model.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "monosched/ddpg.hpp"

namespace monosched {

/// Invalid configuration; field() is a dotted path such as "train.batch".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& why)
      : std::runtime_error(field + ": " + why), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Runs that cannot be tabulated together.
class ComparabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProcessGenConfig {
  int state_dim = 2;
  int meas_dim = 1;
  double rho_min = 1.0;  // target spectral radius ~ U(rho_min, rho_max)
  double rho_max = 1.3;
};

struct ChannelConfig {
  std::string quantization = "equal_quantile";  // or "thresholds"
  double rayleigh_scale = 1.0;
  std::vector<double> thresholds;  // ascending gain cut-points, levels - 1 of them
  std::vector<double> drop_probs;  // per level, empty -> default table (5 levels only)
};

struct EvalConfig {
  int episodes = 100;
  int horizon = 200;
  bool baselines = true;  // also evaluate random_feasible and greedy_aoi
};

struct ExperimentConfig {
  std::string name = "custom";
  std::uint64_t seed = 1;
  int num_devices = 6;
  int num_channels = 3;
  int levels = 5;
  int tau_max = 30;
  double gamma = 0.95;
  ProcessGenConfig process;
  std::vector<LtiProcess> processes;  // explicit systems; empty -> generated from the seed
  ChannelConfig channel;
  std::vector<Variant> variants{Variant::kBaseline, Variant::kMonotoneArchitecture, Variant::kDerivativePenalty,
                                Variant::kIncrementPenalty};
  TrainConfig train;  // shared settings; gamma and variant are filled per run
  std::vector<std::pair<Variant, TrainConfig>> variant_train;  // full per-variant overrides
  EvalConfig evaluation;
  bool dump_trajectories = false;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  /// Effective training settings for one variant.
  TrainConfig train_config(Variant v) const;
};

/// "tiny", "small" or "medium"; throws ConfigError("preset", ...) otherwise.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

std::string to_json(const ExperimentConfig& config);
/// Strict parse: unknown keys and type mismatches raise ConfigError. Missing keys keep defaults.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

/// Processes, costs, channels and environment pinned by (config, seed).
struct SystemInstance {
  std::vector<LtiProcess> processes;
  std::vector<CostModel> costs;
  ChannelModel channel;
  SchedulingEnv env;
};

SystemInstance build_system(const ExperimentConfig& config);

enum class BaselineKind { kRandomFeasible, kGreedyAoi };

std::string to_string(BaselineKind k);
BaselineKind baseline_from_string(const std::string& s);

/// random_feasible: uniform over feasible schedules. greedy_aoi: the M costliest
/// devices (ties -> lowest index), in cost order, each take the free channel with
/// the lowest current drop probability (ties -> lowest channel).
ScheduleAction baseline_policy(BaselineKind kind, const SystemState& state, const SchedulingEnv& env, Rng& rng);

/// Episode count at convergence: 1 + the first episode e whose trailing `window`-episode
/// mean lies within `rel` of the mean of the last `tail` episodes. nullopt if none does.
std::optional<int> episodes_to_convergence(const std::vector<double>& curve, int window = 10, int tail = 50,
                                           double rel = 0.05);

/// Mean of the last min(tail, size) entries.
double final_average(const std::vector<double>& curve, int tail = 50);

struct VariantSummary {
  std::string variant;        // variant or baseline name
  std::optional<int> nec;     // empty for baselines and non-converged runs
  double final_avg_cost = 0;  // last-50-episode training average (eval cost for baselines)
  double eval_avg_cost = 0;   // noise-free policy, evaluation.episodes x horizon
  double eval_stderr = 0;
  double seconds_per_episode = 0;  // wall clock; stored apart from the deterministic CSVs
};

struct RunResult {
  std::filesystem::path dir;
  std::string run_id;
  std::vector<VariantSummary> summaries;
};

/// Trains every configured variant and writes into `out_dir`:
///   config.json       resolved config snapshot
///   metrics.csv       per-episode rows (deterministic)
///   summary.csv       variant, nec, final_avg_cost, eval_avg_cost, eval_stderr (deterministic)
///   timing.csv        variant, seconds_per_episode
///   <variant>.ckpt    trained actor and critic
///   trajectories.csv  when dump_trajectories is set
/// Divergence is rethrown as TrainingDivergedError with the variant name prefixed.
RunResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const std::string& run_id, Variant v, const EpisodeMetrics& m);

/// Trained agent bundled with the config it came from.
struct Checkpoint {
  ExperimentConfig config;
  Variant variant = Variant::kBaseline;
  Agent agent;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct ComparisonRow {
  std::string variant;
  int runs = 0;
  double seconds_mean = 0, seconds_std = 0;
  int nec_converged = 0;  // runs with a defined NEC
  double nec_mean = 0, nec_std = 0;
  double final_cost_mean = 0, final_cost_std = 0;
  double eval_cost_mean = 0, eval_cost_std = 0;
};

/// Reads each run directory and aggregates mean +- sample std per variant.
/// Requires >= 2 runs whose configs agree up to the seed; throws ComparabilityError otherwise.
std::vector<ComparisonRow> compare_report(const std::vector<std::filesystem::path>& run_dirs,
                                          bool include_baselines = false);

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows);

/// SEMSCHED_OUT_DIR if set, otherwise `fallback`.
std::filesystem::path output_dir(const std::filesystem::path& fallback);

}  // namespace monosched
