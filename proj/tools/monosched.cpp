// monosched: command-line front end for the scheduling experiments.
//
//   monosched verify-monotonicity [--preset tiny] [--gamma 0.95] [--tol 1e-12]
//   monosched train (--config FILE | --preset NAME) [--variant NAME]... [--seed N] [--out DIR]
//   monosched evaluate --checkpoint FILE [--episodes N] [--trajectory CSV]
//   monosched compare --runs DIR DIR... [--baselines]
//   monosched show-config --preset NAME
//
// Output directories default to runs/<name>-s<seed>; SEMSCHED_OUT_DIR overrides
// the default (an explicit --out always wins).

#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "monosched/harness.hpp"

using namespace monosched;

namespace {

int verify(const std::string& preset_name, std::optional<double> gamma, double tol, double eps, bool negative) {
  ExperimentConfig config = preset(preset_name);
  if (gamma) config.gamma = *gamma;
  config.validate();
  SystemInstance sys = build_system(config);
  SchedulingEnv env = sys.env;
  if (negative) {
    // Drop probabilities decreasing in the level break the channel ordering the properties rely on.
    const VectorXd& p = sys.channel.drop_table(0, 0);
    ChannelModel reversed = ChannelModel::shared(config.num_devices, config.num_channels,
                                                 sys.channel.level_probs(0, 0), p.reverse(),
                                                 ChannelModel::DropOrdering::kUnchecked);
    env = SchedulingEnv(reversed, sys.costs, config.tau_max);
  }
  const TabularMdp mdp(env, config.gamma);
  const ValueTables tables = value_iteration(mdp, tol);
  const auto aoi = check_aoi_monotonicity(tables, mdp, eps);
  const auto ch = check_channel_monotonicity(tables, mdp, eps);

  std::cout << "preset " << preset_name << (negative ? " (reversed drop table)" : "") << ": " << mdp.num_states()
            << " states, " << mdp.num_actions() << " actions, " << tables.sweeps << " sweeps, residual "
            << tables.bellman_residual << '\n';
  std::map<Violation::Kind, int> counts;
  for (const auto& v : aoi) ++counts[v.kind];
  for (const auto& v : ch) ++counts[v.kind];
  for (auto kind : {Violation::Kind::kAoiValue, Violation::Kind::kAoiQ, Violation::Kind::kChannelUsed,
                    Violation::Kind::kChannelUnused})
    std::cout << "  " << std::left << std::setw(18) << to_string(kind) << counts[kind] << " violations\n";
  int shown = 0;
  for (const auto* list : {&aoi, &ch})
    for (const auto& v : *list) {
      if (shown++ >= 5) break;
      std::cout << "  e.g. " << to_string(v.kind) << " state " << v.state << " -> " << v.perturbed << " action "
                << v.action << " gap " << v.gap << '\n';
    }
  return aoi.empty() && ch.empty() ? 0 : 1;
}

int train_cmd(const std::string& config_path, const std::string& preset_name, const std::vector<std::string>& variants,
              std::optional<std::uint64_t> seed, std::optional<int> episodes, bool dump, std::string out) {
  ExperimentConfig config = config_path.empty() ? preset(preset_name.empty() ? "tiny" : preset_name)
                                                : load_config(config_path);
  if (seed) config.seed = *seed;
  if (episodes) config.train.episodes = *episodes;
  if (episodes)
    for (auto& [v, t] : config.variant_train) t.episodes = *episodes;
  if (dump) config.dump_trajectories = true;
  if (!variants.empty() && !(variants.size() == 1 && variants[0] == "all")) {
    config.variants.clear();
    for (const auto& name : variants) config.variants.push_back(variant_from_string(name));
  }
  config.validate();
  const std::filesystem::path dir =
      out.empty() ? output_dir("runs") / (config.name + "-s" + std::to_string(config.seed)) : std::filesystem::path(out);
  const RunResult result = run_experiment(config, dir);
  std::cout << "run " << result.run_id << " -> " << result.dir.string() << '\n';
  std::cout << std::setprecision(6);
  for (const auto& s : result.summaries) {
    std::cout << "  " << std::left << std::setw(16) << s.variant << " final " << s.final_avg_cost << "  eval "
              << s.eval_avg_cost << " +- " << s.eval_stderr << "  nec ";
    if (s.nec) std::cout << *s.nec;
    else std::cout << '-';
    std::cout << '\n';
  }
  return 0;
}

int evaluate_cmd(const std::string& path, int episodes, std::optional<int> horizon, std::optional<std::uint64_t> seed,
                 const std::string& trajectory) {
  const Checkpoint ckpt = load_checkpoint(path);
  const SystemInstance sys = build_system(ckpt.config);
  const int h = horizon.value_or(ckpt.config.evaluation.horizon);
  const Policy policy = actor_policy(ckpt.agent, sys.env);
  Rng rng = make_stream(seed.value_or(ckpt.config.seed), Stream::kEval);
  if (!trajectory.empty()) {
    std::ofstream out(trajectory);
    if (!out) throw std::runtime_error("cannot write " + trajectory);
    out << std::setprecision(12) << "episode,";
    write_trajectory_header(out, ckpt.config.num_devices, ckpt.config.num_channels);
    double total = 0;
    for (int e = 0; e < episodes; ++e) {
      SystemState s = sys.env.reset(rng);
      for (int t = 0; t < h; ++t) {
        const ScheduleAction a = policy(s);
        StepOutcome step = sys.env.step(s, a, rng);
        out << e << ',';
        write_trajectory_row(out, t, s, a, step.reward);
        total -= step.reward;
        s = std::move(step.next_state);
      }
    }
    std::cout << "avg_sum_cost " << total / (static_cast<double>(episodes) * h) << " (trajectories in " << trajectory
              << ")\n";
    return 0;
  }
  const PolicyEvaluation ev = evaluate_policy(policy, sys.env, rng, episodes, h, ckpt.config.gamma);
  std::cout << std::setprecision(8) << "variant " << to_string(ckpt.variant) << '\n'
            << "avg_sum_cost " << ev.avg_sum_cost << " +- " << ev.sum_cost_stderr << '\n'
            << "discounted_return " << ev.avg_discounted_return << " +- " << ev.discounted_return_stderr << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic-aware transmission scheduling: exact checks and DDPG training"};
  app.require_subcommand(1);

  auto* verify_sc = app.add_subcommand("verify-monotonicity", "Solve a preset exactly and check Q monotonicity");
  std::string v_preset = "tiny";
  std::optional<double> v_gamma;
  double v_tol = 1e-12, v_eps = 1e-9;
  bool v_negative = false;
  verify_sc->add_option("--preset", v_preset, "Preset to solve")->check(CLI::IsMember(preset_names()));
  verify_sc->add_option("--gamma", v_gamma, "Discount factor override");
  verify_sc->add_option("--tol", v_tol, "Value-iteration tolerance");
  verify_sc->add_option("--eps", v_eps, "Violation threshold");
  verify_sc->add_flag("--negative-control", v_negative, "Reverse the drop table (violations expected)");

  auto* train_sc = app.add_subcommand("train", "Train DDPG variants and write CSV artifacts");
  std::string t_config, t_preset, t_out;
  std::vector<std::string> t_variants;
  std::optional<std::uint64_t> t_seed;
  std::optional<int> t_episodes;
  bool t_dump = false;
  auto* cfg_opt = train_sc->add_option("--config", t_config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  train_sc->add_option("--preset", t_preset, "Built-in preset instead of a config file")
      ->check(CLI::IsMember(preset_names()))
      ->excludes(cfg_opt);
  train_sc->add_option("--variant", t_variants, "ddpg, ma, mri, mrii or all (repeatable)");
  train_sc->add_option("--seed", t_seed, "Master seed override");
  train_sc->add_option("--episodes", t_episodes, "Episode count override");
  train_sc->add_option("--out", t_out, "Output directory");
  train_sc->add_flag("--dump-trajectories", t_dump, "Write every training step to trajectories.csv");

  auto* eval_sc = app.add_subcommand("evaluate", "Evaluate a trained checkpoint without exploration noise");
  std::string e_ckpt, e_traj;
  int e_episodes = 100;
  std::optional<int> e_horizon;
  std::optional<std::uint64_t> e_seed;
  eval_sc->add_option("--checkpoint", e_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_sc->add_option("--episodes", e_episodes, "Evaluation episodes")->check(CLI::PositiveNumber);
  eval_sc->add_option("--horizon", e_horizon, "Steps per episode");
  eval_sc->add_option("--seed", e_seed, "Evaluation seed");
  eval_sc->add_option("--trajectory", e_traj, "Dump the rollouts to this CSV");

  auto* cmp_sc = app.add_subcommand("compare", "Aggregate runs into a mean +- std table");
  std::vector<std::string> c_runs;
  std::string c_out;
  bool c_baselines = false;
  cmp_sc->add_option("--runs", c_runs, "Run directories")->required()->check(CLI::ExistingDirectory);
  cmp_sc->add_flag("--baselines", c_baselines, "Include heuristic baseline rows");
  cmp_sc->add_option("--out", c_out, "Write the table here instead of stdout");

  auto* show_sc = app.add_subcommand("show-config", "Print a preset as a JSON config");
  std::string s_preset = "tiny";
  show_sc->add_option("--preset", s_preset, "Preset")->check(CLI::IsMember(preset_names()));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*verify_sc) return verify(v_preset, v_gamma, v_tol, v_eps, v_negative);
    if (*train_sc) return train_cmd(t_config, t_preset, t_variants, t_seed, t_episodes, t_dump, t_out);
    if (*eval_sc) return evaluate_cmd(e_ckpt, e_episodes, e_horizon, e_seed, e_traj);
    if (*cmp_sc) {
      std::vector<std::filesystem::path> dirs(c_runs.begin(), c_runs.end());
      const auto rows = compare_report(dirs, c_baselines);
      if (c_out.empty()) {
        write_comparison_csv(std::cout, rows);
      } else {
        std::ofstream out(c_out);
        write_comparison_csv(out, rows);
      }
      return 0;
    }
    if (*show_sc) {
      std::cout << to_json(preset(s_preset));
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ComparabilityError& e) {
    std::cerr << "cannot compare: " << e.what() << '\n';
    return 2;
  } catch (const TrainingDivergedError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
