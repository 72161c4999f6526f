#include <chrono>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "monosched/harness.hpp"

namespace monosched {

namespace {

// Extra stream ids beyond the core set, for baseline randomness.
constexpr std::uint64_t kBaselineStream = 8;

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(12);
  return out;
}

}  // namespace

SystemInstance build_system(const ExperimentConfig& config) {
  config.validate();
  std::vector<LtiProcess> processes = config.processes;
  if (processes.empty()) {
    Rng rng = make_stream(config.seed, Stream::kSystem);
    for (int n = 0; n < config.num_devices; ++n)
      processes.push_back(sample_process(rng, config.process.state_dim, config.process.meas_dim,
                                         {config.process.rho_min, config.process.rho_max}));
  }
  std::vector<CostModel> costs;
  for (const LtiProcess& p : processes) costs.push_back(CostModel::build(p, config.tau_max));

  const VectorXd q = config.channel.quantization == "thresholds"
                         ? quantize_rayleigh(config.channel.rayleigh_scale, config.channel.thresholds)
                         : quantize_rayleigh(config.channel.rayleigh_scale, config.levels);
  const VectorXd p = config.channel.drop_probs.empty()
                         ? default_drop_probs()
                         : Eigen::Map<const VectorXd>(config.channel.drop_probs.data(),
                                                      static_cast<Index>(config.channel.drop_probs.size()));
  ChannelModel channel = ChannelModel::shared(config.num_devices, config.num_channels, q, p);
  SchedulingEnv env(channel, costs, config.tau_max);
  return {std::move(processes), std::move(costs), std::move(channel), std::move(env)};
}

std::string to_string(BaselineKind k) { return k == BaselineKind::kGreedyAoi ? "greedy_aoi" : "random_feasible"; }

BaselineKind baseline_from_string(const std::string& s) {
  if (s == "random_feasible") return BaselineKind::kRandomFeasible;
  if (s == "greedy_aoi") return BaselineKind::kGreedyAoi;
  throw std::invalid_argument("unknown baseline '" + s + "' (expected random_feasible or greedy_aoi)");
}

ScheduleAction baseline_policy(BaselineKind kind, const SystemState& state, const SchedulingEnv& env, Rng& rng) {
  const int n_dev = env.num_devices();
  const int n_ch = env.num_channels();
  ScheduleAction a = ScheduleAction::Zero(n_dev);
  if (kind == BaselineKind::kRandomFeasible) {
    // The first M entries of a uniform permutation: every injective channel -> device map is equally likely.
    std::vector<int> order(n_dev);
    std::iota(order.begin(), order.end(), 0);
    for (int m = 0; m < n_ch; ++m) {
      const int pick = m + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n_dev - m)));
      std::swap(order[m], order[pick]);
      a(order[m]) = m + 1;
    }
    return a;
  }
  std::vector<int> order(n_dev);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> cost(n_dev);
  for (int n = 0; n < n_dev; ++n) cost[n] = env.costs()[n](state.tau(n));
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return cost[x] > cost[y]; });
  std::vector<bool> used(n_ch, false);
  for (int k = 0; k < n_ch; ++k) {
    const int n = order[k];
    int best = -1;
    double best_p = 0;
    for (int m = 0; m < n_ch; ++m) {
      if (used[m]) continue;
      const double p = env.channel().drop_probability(n, m, state.h(n, m));
      if (best < 0 || p < best_p) {
        best = m;
        best_p = p;
      }
    }
    used[best] = true;
    a(n) = best + 1;
  }
  return a;
}

void write_metrics_header(std::ostream& out) {
  out << "run_id,variant,episode,avg_sum_cost,critic_loss,actor_loss,penalty,updates\n";
}

void write_metrics_row(std::ostream& out, const std::string& run_id, Variant v, const EpisodeMetrics& m) {
  out << run_id << ',' << to_string(v) << ',' << m.episode << ',' << m.avg_sum_cost << ',' << m.critic_loss << ','
      << m.actor_loss << ',' << m.penalty << ',' << m.updates << '\n';
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::string config = to_json(ckpt.config);
  std::istringstream lines(config);
  std::ostringstream compact;
  for (std::string line; std::getline(lines, line);) {
    const auto first = line.find_first_not_of(' ');
    if (first != std::string::npos) compact << line.substr(first);
  }
  out << "monosched-checkpoint 1\n";
  out << "variant " << to_string(ckpt.variant) << '\n';
  out << "config " << compact.str() << '\n';
  out << "actor\n";
  nn::write_network(out, ckpt.agent.actor);
  nn::write_network(out, ckpt.agent.critic);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::string tag, version;
  if (!(in >> tag >> version) || tag != "monosched-checkpoint" || version != "1")
    throw std::runtime_error("checkpoint: unrecognized header in " + path.string());
  Checkpoint ckpt;
  std::string name;
  in >> tag >> name;
  if (tag != "variant") throw std::runtime_error("checkpoint: missing variant line");
  ckpt.variant = variant_from_string(name);
  in >> tag;
  if (tag != "config") throw std::runtime_error("checkpoint: missing config line");
  std::string config;
  std::getline(in, config);
  ckpt.config = parse_config(config);
  in >> tag;
  if (tag != "actor") throw std::runtime_error("checkpoint: missing actor block");
  Agent& agent = ckpt.agent;
  agent.num_devices = ckpt.config.num_devices;
  agent.num_channels = ckpt.config.num_channels;
  agent.actor = nn::read_mlp<double>(in);
  agent.critic = nn::read_critic<double>(in);
  if (agent.actor.input_dim() != agent.state_dim() || agent.actor.output_dim() != agent.num_devices ||
      agent.critic.state_dim() != agent.state_dim() || agent.critic.action_dim() != agent.num_devices)
    throw std::runtime_error("checkpoint: network shapes do not match the stored config");
  agent.target_actor = agent.actor;
  agent.target_critic = agent.critic;
  agent.actor_opt = nn::AdamState<double>(agent.actor.num_params());
  agent.critic_opt = nn::AdamState<double>(agent.critic.num_params());
  return ckpt;
}

RunResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  RunResult result;
  result.dir = out_dir;
  result.run_id = config.name + "-s" + std::to_string(config.seed);

  {
    std::ofstream snap = open_out(out_dir / "config.json");
    snap << to_json(config);
  }
  const SystemInstance sys = build_system(config);
  const SchedulingEnv& env = sys.env;

  std::ofstream metrics = open_out(out_dir / "metrics.csv");
  write_metrics_header(metrics);
  std::ofstream traj;
  if (config.dump_trajectories) {
    traj = open_out(out_dir / "trajectories.csv");
    traj << "variant,episode,";
    write_trajectory_header(traj, config.num_devices, config.num_channels);
  }

  for (Variant v : config.variants) {
    const TrainConfig tc = config.train_config(v);
    Rng init = make_stream(config.seed, Stream::kInit);
    Agent agent = Agent::create(tc, config.num_devices, config.num_channels, init);
    TrainRngs rngs{make_stream(config.seed, Stream::kChannel), make_stream(config.seed, Stream::kExplore),
                   make_stream(config.seed, Stream::kReplay), make_stream(config.seed, Stream::kPenalty)};

    std::vector<double> curve;
    double seconds = 0;
    const MetricsSink sink = [&](const EpisodeMetrics& m) {
      write_metrics_row(metrics, result.run_id, v, m);
      curve.push_back(m.avg_sum_cost);
      seconds += m.wall_seconds;
    };
    StepSink steps;
    if (config.dump_trajectories) {
      steps = [&](int episode, int t, const SystemState& s, const ScheduleAction& a, double r) {
        traj << to_string(v) << ',' << episode << ',';
        write_trajectory_row(traj, t, s, a, r);
      };
    }
    try {
      train(agent, env, tc, rngs, sink, steps);
    } catch (const TrainingDivergedError& e) {
      throw TrainingDivergedError(to_string(v) + ": " + e.what(), e.episode());
    }
    metrics.flush();

    VariantSummary summary;
    summary.variant = to_string(v);
    summary.nec = episodes_to_convergence(curve);
    summary.final_avg_cost = curve.empty() ? 0.0 : final_average(curve);
    summary.seconds_per_episode = curve.empty() ? 0.0 : seconds / static_cast<double>(curve.size());
    Rng eval = make_stream(config.seed, Stream::kEval);
    const PolicyEvaluation ev = evaluate_policy(actor_policy(agent, env), env, eval, config.evaluation.episodes,
                                                config.evaluation.horizon, config.gamma);
    summary.eval_avg_cost = ev.avg_sum_cost;
    summary.eval_stderr = ev.sum_cost_stderr;
    if (curve.empty()) summary.final_avg_cost = ev.avg_sum_cost;
    result.summaries.push_back(summary);

    save_checkpoint(out_dir / (to_string(v) + ".ckpt"), Checkpoint{config, v, std::move(agent)});
  }

  if (config.evaluation.baselines) {
    for (BaselineKind kind : {BaselineKind::kRandomFeasible, BaselineKind::kGreedyAoi}) {
      Rng choice = make_stream(config.seed, kBaselineStream);
      const Policy policy = [&](const SystemState& s) { return baseline_policy(kind, s, env, choice); };
      Rng eval = make_stream(config.seed, Stream::kEval);
      const PolicyEvaluation ev =
          evaluate_policy(policy, env, eval, config.evaluation.episodes, config.evaluation.horizon, config.gamma);
      VariantSummary summary;
      summary.variant = to_string(kind);
      summary.final_avg_cost = ev.avg_sum_cost;
      summary.eval_avg_cost = ev.avg_sum_cost;
      summary.eval_stderr = ev.sum_cost_stderr;
      result.summaries.push_back(summary);
    }
  }

  std::ofstream summary = open_out(out_dir / "summary.csv");
  summary << "variant,nec,final_avg_cost,eval_avg_cost,eval_stderr\n";
  for (const VariantSummary& s : result.summaries) {
    summary << s.variant << ',';
    if (s.nec) summary << *s.nec;
    summary << ',' << s.final_avg_cost << ',' << s.eval_avg_cost << ',' << s.eval_stderr << '\n';
  }
  std::ofstream timing = open_out(out_dir / "timing.csv");
  timing << "variant,seconds_per_episode\n";
  for (const VariantSummary& s : result.summaries) timing << s.variant << ',' << s.seconds_per_episode << '\n';
  return result;
}

std::filesystem::path output_dir(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("SEMSCHED_OUT_DIR"); env && *env) return env;
  return fallback;
}

}  // namespace monosched
