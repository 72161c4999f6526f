// Acceptance runner: one PASS/FAIL line per criterion.
//
//   monosched_acceptance [--criterion N]... [--cli PATH] [--work DIR]
//
// Criterion 7 trains 12 agents on the small and medium presets and takes tens
// of minutes on one core; the others finish in seconds to a few minutes.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "monosched/harness.hpp"

using namespace monosched;
using nn::Activation;
using nn::Mat;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  std::string cli;
  std::filesystem::path work;
};

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

std::string fmt(double x, int precision = 4) {
  std::ostringstream out;
  out << std::setprecision(precision) << x;
  return out.str();
}

// ---------------------------------------------------------------------------

Outcome monotonicity_of_exact_solution(const Context&) {
  const ExperimentConfig c = preset("tiny");
  const SystemInstance sys = build_system(c);
  const TabularMdp mdp(sys.env, 0.95);
  const ValueTables tables = value_iteration(mdp, 1e-12);
  const auto aoi = check_aoi_monotonicity(tables, mdp, 1e-9);
  const auto ch = check_channel_monotonicity(tables, mdp, 1e-9);

  // Count the exact-equality probes: (state, unused channel raised, action).
  long equality_probes = 0;
  const StateSpace& space = mdp.space();
  for (Index s = 0; s < space.size(); ++s) {
    const SystemState st = space.state(s);
    for (int n = 0; n < c.num_devices; ++n)
      for (int m = 0; m < c.num_channels; ++m) {
        if (st.h(n, m) >= c.levels) continue;
        for (const auto& a : mdp.actions())
          if (a(n) != m + 1) ++equality_probes;
      }
  }

  // Negative control: drop probabilities decreasing in the level.
  const ChannelModel reversed =
      ChannelModel::shared(c.num_devices, c.num_channels, sys.channel.level_probs(0, 0),
                           sys.channel.drop_table(0, 0).reverse(), ChannelModel::DropOrdering::kUnchecked);
  const SchedulingEnv bad_env(reversed, sys.costs, c.tau_max);
  const TabularMdp bad(bad_env, 0.95);
  const auto bad_ch = check_channel_monotonicity(value_iteration(bad, 1e-12), bad, 1e-9);
  long used = 0;
  for (const auto& v : bad_ch) used += v.kind == Violation::Kind::kChannelUsed;

  Outcome o;
  o.pass = aoi.empty() && ch.empty() && used > 0;
  o.detail = std::to_string(mdp.num_states()) + " states, " + std::to_string(aoi.size() + ch.size()) +
             " violations (" + std::to_string(equality_probes) + " unused-channel equality probes); negative control: " +
             std::to_string(used) + " used-channel violations";
  return o;
}

Outcome cost_model(const Context&) {
  Rng rng = make_stream(2024, Stream::kSystem);
  int bad = 0;
  for (int i = 0; i < 100; ++i) {
    const LtiProcess p = sample_process(rng, 2, 1, {1.0, 1.3});
    const CostModel g = CostModel::build(p, 30);
    for (int tau = 1; tau <= 30; ++tau) {
      if (!(g(tau) > 0)) ++bad;
      if (tau > 1 && g(tau) < g(tau - 1)) ++bad;
    }
  }
  LtiProcess id;
  id.A = MatrixXd::Identity(2, 2);
  id.C = (MatrixXd(2, 2) << 1.0, 0.2, 0.3, 0.8).finished();
  id.W = (MatrixXd(2, 2) << 1.5, 0.1, 0.1, 0.7).finished();
  id.V = MatrixXd::Identity(2, 2);
  const CostModel g = CostModel::build(id, 30);
  double worst = 0;
  for (int tau = 1; tau <= 30; ++tau) {
    const double closed = g(1) + (tau - 1) * id.W.trace();
    worst = std::max(worst, std::abs(g(tau) - closed) / std::abs(closed));
  }
  Outcome o;
  o.pass = bad == 0 && worst <= 1e-9;
  o.detail = "100 processes: " + std::to_string(bad) + " ordering failures; A=I closed-form rel err " + fmt(worst);
  return o;
}

Outcome gradients(const Context&) {
  Rng rng(33);
  std::normal_distribution<double> nd(0.0, 0.5);
  const double h = 1e-6;
  double worst = 0;
  int nets = 0;
  const std::vector<Activation> acts{Activation::kIdentity, Activation::kRelu, Activation::kSigmoid, Activation::kTanh};
  for (Activation hidden : acts)
    for (Activation out : acts) {
      nn::Mlp<double> net = nn::Mlp<double>::make(5, {7, 6}, 3, hidden, out);
      Mat<double> x;
      nn::Mlp<double>::Cache cache;
      // Redraw until no ReLU pre-activation sits within reach of the kink.
      for (;;) {
        net.initialize(rng);
        for (Index i = 0; i < net.params().size(); ++i) net.params()(i) += 0.3 * nd(rng);
        x = Mat<double>::Random(5, 4);
        net.forward(x, &cache);
        bool safe = true;
        for (std::size_t l = 0; l < cache.z.size(); ++l)
          if (net.layout().activations()[l] == Activation::kRelu && (cache.z[l].array().abs() < 1e-3).any())
            safe = false;
        if (safe) break;
      }
      const Mat<double> w = Mat<double>::Random(3, 4);
      const auto loss = [&](const nn::Mlp<double>& m, const Mat<double>& in) {
        return (m.forward(in).array() * w.array()).sum();
      };
      VectorXd grad = VectorXd::Zero(net.num_params());
      const Mat<double> dx = net.backward(cache, w, grad);
      for (Index i = 0; i < net.num_params(); ++i) {
        nn::Mlp<double> p = net, m = net;
        p.params()(i) += h;
        m.params()(i) -= h;
        worst = std::max(worst, rel_err(grad(i), (loss(p, x) - loss(m, x)) / (2 * h)));
      }
      for (Index r = 0; r < x.rows(); ++r)
        for (Index c = 0; c < x.cols(); ++c) {
          Mat<double> xp = x, xm = x;
          xp(r, c) += h;
          xm(r, c) -= h;
          worst = std::max(worst, rel_err(dx(r, c), (loss(net, xp) - loss(net, xm)) / (2 * h)));
        }
      ++nets;
    }
  // Input gradient of a critic with respect to the state, as used by the derivative penalty.
  nn::Mlp<double> body = nn::Mlp<double>::make(9, {8, 8}, 1, Activation::kTanh, Activation::kIdentity);
  body.initialize(rng);
  const nn::Critic<double> critic(body, 6);
  const VectorXd s = VectorXd::Random(6), a = VectorXd::Random(3);
  nn::Critic<double>::Cache cc;
  critic.forward(s, a, &cc);
  const auto [ds, da] = critic.input_gradient(cc, Mat<double>::Ones(1, 1));
  for (Index j = 0; j < 6; ++j) {
    VectorXd sp = s, sm = s;
    sp(j) += h;
    sm(j) -= h;
    worst = std::max(worst, rel_err(ds(j, 0), (critic.forward(sp, a)(0, 0) - critic.forward(sm, a)(0, 0)) / (2 * h)));
  }
  for (Index j = 0; j < 3; ++j) {
    VectorXd ap = a, am = a;
    ap(j) += h;
    am(j) -= h;
    worst = std::max(worst, rel_err(da(j, 0), (critic.forward(s, ap)(0, 0) - critic.forward(s, am)(0, 0)) / (2 * h)));
  }
  Outcome o;
  o.pass = worst < 1e-6;
  o.detail = std::to_string(nets) + " nets + critic input gradient, max rel err " + fmt(worst);
  return o;
}

Outcome architectural_monotonicity(const Context&) {
  Rng rng(44);
  const int ds = 12, da = 6;
  nn::MonotoneCritic<double> critic(ds, 16, da, 8);
  std::normal_distribution<double> nd(0.0, 1.0);
  long violations = 0, probes = 0;
  for (int draw = 0; draw < 1000; ++draw) {
    critic.initialize(rng);
    for (Index i = 0; i < critic.params().size(); ++i) critic.params()(i) += nd(rng);
    critic.project();
    for (int k = 0; k < 100; ++k) {
      const VectorXd s = VectorXd::Random(ds);
      const VectorXd sp = s + (VectorXd::Random(ds).array().abs() * (uniform01(rng) < 0.5 ? 1e-3 : 1.0)).matrix();
      const VectorXd a = VectorXd::Random(da);
      if (critic.forward(sp, a)(0, 0) > critic.forward(s, a)(0, 0)) ++violations;
      ++probes;
    }
  }
  Outcome o;
  o.pass = violations == 0;
  o.detail = std::to_string(probes) + " probes, " + std::to_string(violations) + " violations";
  return o;
}

Outcome penalty_consistency(const Context&) {
  Rng rng(55);
  const ExperimentConfig c = preset("tiny");
  const SystemInstance sys = build_system(c);
  const SchedulingEnv& env = sys.env;
  const int ds = c.num_devices * (c.num_channels + 1), da = c.num_devices;
  const std::vector<Index> all = [&] {
    std::vector<Index> v(ds);
    for (int j = 0; j < ds; ++j) v[j] = j;
    return v;
  }();
  const StateEncoder enc = [&](const SystemState& st) { return env.encode(st); };
  const auto actions = enumerate_actions(c.num_devices, c.num_channels);

  int mri_nonzero = 0, mrii_nonzero = 0, mrii_mismatch = 0;
  nn::MonotoneCritic<double> mc(ds, 16, da, 8);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int draw = 0; draw < 200; ++draw) {
    mc.initialize(rng);
    for (Index i = 0; i < mc.params().size(); ++i) mc.params()(i) += nd(rng);
    mc.project();
    const nn::Critic<double> critic(mc);
    const SystemState st = env.reset(rng);
    const ScheduleAction act = actions[uniform_index(rng, actions.size())];
    const VectorXd a = encode_action(act, c.num_channels);
    if (penalty_type1(critic, env.encode(st), a, all) != 0.0) ++mri_nonzero;
    if (penalty_type2(critic, st, a, effective_set(st, act, c.num_devices, c.num_channels), enc, c.levels) != 0.0)
      ++mrii_nonzero;
  }

  double worst_fd = 0;
  for (int draw = 0; draw < 50; ++draw) {
    nn::Mlp<double> body = nn::Mlp<double>::make(ds + da, {16, 16}, 1, Activation::kTanh, Activation::kIdentity);
    body.initialize(rng);
    const nn::Critic<double> critic(body, ds);
    SystemState st = env.reset(rng);
    st.tau(0) = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(c.tau_max)));
    const ScheduleAction act = actions[uniform_index(rng, actions.size())];
    const VectorXd a = encode_action(act, c.num_channels);
    for (Index j : effective_set(st, act, c.num_devices, c.num_channels)) {
      SystemState moved;
      if (!increment_state(st, j, c.levels, moved)) continue;
      const double explicit_diff = critic.forward(env.encode(moved), a)(0, 0) - critic.forward(env.encode(st), a)(0, 0);
      if (penalty_type2(critic, st, a, {j}, enc, c.levels) != std::max(0.0, explicit_diff)) ++mrii_mismatch;
    }
    const VectorXd s = env.encode(st);
    nn::Critic<double>::Cache cache;
    critic.forward(s, a, &cache);
    const Mat<double> qd = critic.input_gradient(cache, Mat<double>::Ones(1, 1)).first;
    const double h = 1e-6;
    for (Index j = 0; j < ds; ++j) {
      VectorXd sp = s, sm = s;
      sp(j) += h;
      sm(j) -= h;
      worst_fd = std::max(worst_fd, rel_err(qd(j, 0), (critic.forward(sp, a)(0, 0) - critic.forward(sm, a)(0, 0)) / (2 * h)));
    }
  }
  Outcome o;
  o.pass = mri_nonzero == 0 && mrii_nonzero == 0 && mrii_mismatch == 0 && worst_fd < 1e-6;
  o.detail = "monotone critic penalties nonzero: type I " + std::to_string(mri_nonzero) + ", type II " +
             std::to_string(mrii_nonzero) + "; type II vs two forwards mismatches " + std::to_string(mrii_mismatch) +
             "; derivative vs FD max rel err " + fmt(worst_fd);
  return o;
}

Outcome learning_vs_oracle(const Context&) {
  const ExperimentConfig c = preset("tiny");
  const SystemInstance sys = build_system(c);
  const TabularMdp mdp(sys.env, c.gamma);
  const ValueTables vt = value_iteration(mdp, 1e-12);
  const double v0 = expected_initial_value(mdp, vt.v);
  const int mc_episodes = 10000, horizon = 200;  // gamma^200 < 4e-5

  bool pass = true;
  std::ostringstream detail;
  detail << "V* " << fmt(v0, 6) << ";";
  for (Variant v : c.variants) {
    const TrainConfig tc = c.train_config(v);
    Rng init = make_stream(c.seed, Stream::kInit);
    Agent agent = Agent::create(tc, c.num_devices, c.num_channels, init);
    TrainRngs rngs{make_stream(c.seed, Stream::kChannel), make_stream(c.seed, Stream::kExplore),
                   make_stream(c.seed, Stream::kReplay), make_stream(c.seed, Stream::kPenalty)};
    train(agent, sys.env, tc, rngs);
    // The actor is deterministic, so tabulating it over the finite state space is exact and fast.
    const Policy actor = actor_policy(agent, sys.env);
    std::vector<ScheduleAction> table(static_cast<std::size_t>(mdp.num_states()));
    for (Index s = 0; s < mdp.num_states(); ++s) table[s] = actor(mdp.space().state(s));
    const Policy tabulated = [&](const SystemState& s) { return table[mdp.space().index(s)]; };
    Rng eval = make_stream(c.seed, Stream::kEval);
    const PolicyEvaluation ev = evaluate_policy(tabulated, sys.env, eval, mc_episodes, horizon, c.gamma);
    const double gap = (v0 - ev.avg_discounted_return) / std::abs(v0);
    pass = pass && std::abs(gap) <= 0.10;
    detail << ' ' << to_string(v) << " gap " << fmt(100 * gap, 3) << "%";
  }
  return {pass, detail.str()};
}

Outcome trend_reproduction(const Context& ctx) {
  std::ostringstream detail;
  // Small preset, shallow critic: MA vs baseline on final training cost.
  int ma_wins = 0;
  double reduction = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    ExperimentConfig c = preset("small");
    c.seed = seed;
    c.variants = {Variant::kBaseline, Variant::kMonotoneArchitecture};
    const RunResult r = run_experiment(c, ctx.work / ("small-s" + std::to_string(seed)));
    const double base = r.summaries[0].final_avg_cost, ma = r.summaries[1].final_avg_cost;
    ma_wins += ma < base;
    reduction += (base - ma) / base / 3.0;
    detail << " s" << seed << " ddpg " << fmt(base) << " ma " << fmt(ma) << ";";
  }
  // Medium preset, deep critic: MRII vs baseline on episodes to convergence.
  int mrii_wins = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    ExperimentConfig c = preset("medium");
    c.seed = seed;
    c.variants = {Variant::kBaseline, Variant::kIncrementPenalty};
    const RunResult r = run_experiment(c, ctx.work / ("medium-s" + std::to_string(seed)));
    const auto& base = r.summaries[0].nec;
    const auto& mrii = r.summaries[1].nec;
    // A run that never settles counts as slower than any run that does.
    mrii_wins += mrii && (!base || *mrii < *base);
    const auto show = [](const std::optional<int>& n) { return n ? std::to_string(*n) : std::string("-"); };
    detail << " s" << seed << " nec ddpg " << show(base) << " mrii " << show(mrii) << ";";
  }
  Outcome o;
  o.pass = ma_wins >= 2 && mrii_wins >= 2;
  o.detail = "small: ma lower in " + std::to_string(ma_wins) + "/3 (mean reduction " + fmt(100 * reduction, 3) +
             "%); medium: mrii faster in " + std::to_string(mrii_wins) + "/3;" + detail.str();
  return o;
}

Outcome determinism(const Context& ctx) {
  if (ctx.cli.empty()) return {false, "no --cli given"};
  std::vector<std::string> metrics;
  for (const char* tag : {"a", "b"}) {
    const auto dir = ctx.work / (std::string("determinism-") + tag);
    std::filesystem::remove_all(dir);
    const std::string cmd = "\"" + ctx.cli + "\" train --preset tiny --episodes 25 --seed 11 --out \"" + dir.string() +
                            "\" > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "train command failed: " + cmd};
    std::ifstream in(dir / "metrics.csv", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    metrics.push_back(ss.str());
  }
  Outcome o;
  o.pass = !metrics[0].empty() && metrics[0] == metrics[1];
  o.detail = "metrics.csv " + std::to_string(metrics[0].size()) + " bytes, " +
             (metrics[0] == metrics[1] ? "identical" : "different");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> which;
  Context ctx;
  std::string work = (std::filesystem::temp_directory_path() / "monosched_acceptance").string();
  app.add_option("--criterion", which, "Criterion number 1-8 (repeatable; default all)")->check(CLI::Range(1, 8));
  app.add_option("--cli", ctx.cli, "Path to the monosched executable (criterion 8)");
  app.add_option("--work", work, "Scratch directory for run artifacts");
  CLI11_PARSE(app, argc, argv);
  ctx.work = work;
  std::filesystem::create_directories(ctx.work);
  if (which.empty()) which = {1, 2, 3, 4, 5, 6, 7, 8};

  const std::map<int, std::pair<std::string, std::function<Outcome(const Context&)>>> criteria{
      {1, {"exact Q monotonicity on tiny", monotonicity_of_exact_solution}},
      {2, {"cost model", cost_model}},
      {3, {"gradient correctness", gradients}},
      {4, {"architectural monotonicity", architectural_monotonicity}},
      {5, {"penalty consistency", penalty_consistency}},
      {6, {"learning vs exact optimum", learning_vs_oracle}},
      {7, {"trend reproduction", trend_reproduction}},
      {8, {"determinism", determinism}},
  };
  const std::map<int, double> budget{{1, 5}, {2, 1}, {3, 5}, {4, 10}, {5, 5}, {6, 600}, {7, 3600}, {8, 600}};

  bool all = true;
  for (int k : which) {
    const auto& [name, run] = criteria.at(k);
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= budget.at(k);
    const bool pass = o.pass && in_time;
    all = all && pass;
    std::ostringstream line;
    line << "criterion " << k << " [" << name << "]: " << (pass ? "PASS" : "FAIL") << " (" << fmt(secs, 3) << " s / "
         << budget.at(k) << " s" << (in_time ? "" : ", over budget") << ") " << o.detail;
    std::cout << line.str() << std::endl;
    // ctest hides the output of passing tests; keep a copy next to the artifacts.
    std::ofstream(ctx.work / "acceptance.log", std::ios::app) << line.str() << '\n';
  }
  return all ? 0 : 1;
}
