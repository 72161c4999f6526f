#include "monosched/exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace monosched {

namespace {

void enumerate_actions_rec(int n, int num_devices, int num_channels, VectorXi& current, std::vector<bool>& used,
                           int assigned, std::vector<ScheduleAction>& out) {
  if (n == num_devices) {
    if (assigned == num_channels) out.push_back(current);
    return;
  }
  // Remaining devices must be able to absorb the unassigned channels.
  if (num_channels - assigned > num_devices - n) return;
  for (int m = 0; m <= num_channels; ++m) {
    if (m > 0 && used[m]) continue;
    current(n) = m;
    if (m > 0) used[m] = true;
    enumerate_actions_rec(n + 1, num_devices, num_channels, current, used, assigned + (m > 0 ? 1 : 0), out);
    if (m > 0) used[m] = false;
  }
  current(n) = 0;
}

Index checked_power(Index base, Index exp, double limit, Index acc_so_far) {
  double acc = static_cast<double>(acc_so_far);
  Index out = 1;
  for (Index i = 0; i < exp; ++i) {
    out *= base;
    acc *= static_cast<double>(base);
    if (acc > limit) {
      std::ostringstream msg;
      msg << "state space exceeds the enumeration limit " << limit;
      throw CapacityError(msg.str());
    }
  }
  return out;
}

}  // namespace

std::vector<ScheduleAction> enumerate_actions(int num_devices, int num_channels) {
  if (num_devices < 1 || num_channels < 1) throw std::invalid_argument("enumerate_actions: N and M must be positive");
  if (num_channels > num_devices) throw std::invalid_argument("enumerate_actions: M must not exceed N");
  std::vector<ScheduleAction> out;
  VectorXi current = VectorXi::Zero(num_devices);
  std::vector<bool> used(static_cast<std::size_t>(num_channels) + 1, false);
  enumerate_actions_rec(0, num_devices, num_channels, current, used, 0, out);
  return out;
}

StateSpace::StateSpace(int num_devices, int num_channels, int tau_max, int levels, double limit)
    : num_devices_(num_devices), num_channels_(num_channels), tau_max_(tau_max), levels_(levels) {
  if (num_devices < 1 || num_channels < 1 || tau_max < 1 || levels < 1)
    throw std::invalid_argument("StateSpace: all dimensions must be positive");
  const double total = std::pow(static_cast<double>(tau_max), num_devices) *
                       std::pow(static_cast<double>(levels), static_cast<double>(num_devices) * num_channels);
  if (total > limit) {
    std::ostringstream msg;
    msg << "StateSpace: " << total << " states exceed the enumeration limit " << limit;
    throw CapacityError(msg.str());
  }
  num_tau_ = checked_power(tau_max, num_devices, limit, 1);
  num_h_ = checked_power(levels, static_cast<Index>(num_devices) * num_channels, limit, num_tau_);
}

SystemState StateSpace::state(Index i) const {
  if (i < 0 || i >= size()) throw std::out_of_range("StateSpace::state: index out of range");
  SystemState s;
  s.tau.resize(num_devices_);
  Index t = i / num_h_;
  for (int n = num_devices_ - 1; n >= 0; --n) {
    s.tau(n) = static_cast<int>(t % tau_max_) + 1;
    t /= tau_max_;
  }
  s.h = channel_matrix(i % num_h_);
  return s;
}

ChannelMatrix StateSpace::channel_matrix(Index h_index) const {
  ChannelMatrix h(num_devices_, num_channels_);
  Index r = h_index;
  for (int n = num_devices_ - 1; n >= 0; --n) {
    for (int m = num_channels_ - 1; m >= 0; --m) {
      h(n, m) = static_cast<int>(r % levels_) + 1;
      r /= levels_;
    }
  }
  return h;
}

Index StateSpace::tau_index(const VectorXi& tau) const {
  Index t = 0;
  for (int n = 0; n < num_devices_; ++n) t = t * tau_max_ + (tau(n) - 1);
  return t;
}

Index StateSpace::h_index(const ChannelMatrix& h) const {
  Index r = 0;
  for (int n = 0; n < num_devices_; ++n)
    for (int m = 0; m < num_channels_; ++m) r = r * levels_ + (h(n, m) - 1);
  return r;
}

Index StateSpace::index(const SystemState& s) const { return tau_index(s.tau) * num_h_ + h_index(s.h); }

std::vector<SystemState> enumerate_states(int num_devices, int num_channels, int tau_max, int levels, double limit) {
  const StateSpace space(num_devices, num_channels, tau_max, levels, limit);
  std::vector<SystemState> out;
  out.reserve(static_cast<std::size_t>(space.size()));
  for (Index i = 0; i < space.size(); ++i) out.push_back(space.state(i));
  return out;
}

TabularMdp::TabularMdp(SchedulingEnv env, double gamma, double limit)
    : env_(std::move(env)),
      gamma_(gamma),
      space_(env_.num_devices(), env_.num_channels(), env_.tau_cap(), env_.levels(), limit),
      actions_(enumerate_actions(env_.num_devices(), env_.num_channels())) {
  if (!(gamma > 0 && gamma < 1)) throw std::invalid_argument("TabularMdp: gamma must lie in (0, 1)");
  rewards_.resize(space_.size());
  for (Index s = 0; s < space_.size(); ++s) rewards_(s) = env_.reward(space_.state(s));
  h_probs_.resize(space_.num_channel_matrices());
  for (Index h = 0; h < h_probs_.size(); ++h) h_probs_(h) = env_.channel().matrix_probability(space_.channel_matrix(h));
}

std::vector<std::pair<Index, double>> TabularMdp::aoi_successors(Index s, const ScheduleAction& a) const {
  const SystemState st = space_.state(s);
  const int cap = env_.tau_cap();
  std::vector<std::pair<Index, double>> out{{0, 1.0}};
  for (int n = 0; n < env_.num_devices(); ++n) {
    const Index aged = std::min(st.tau(n) + 1, cap) - 1;
    std::vector<std::pair<Index, double>> next;
    next.reserve(out.size() * 2);
    if (a(n) == 0) {
      for (const auto& [t, p] : out) next.emplace_back(t * cap + aged, p);
    } else {
      const double drop = env_.channel().drop_probability(n, a(n) - 1, st.h(n, a(n) - 1));
      for (const auto& [t, p] : out) {
        if (drop < 1.0) next.emplace_back(t * cap + 0, p * (1.0 - drop));
        if (drop > 0.0) next.emplace_back(t * cap + aged, p * drop);
      }
    }
    out = std::move(next);
  }
  return out;
}

std::vector<std::pair<Index, double>> TabularMdp::successors(Index s, const ScheduleAction& a) const {
  std::vector<std::pair<Index, double>> out;
  const Index nh = space_.num_channel_matrices();
  for (const auto& [t, p] : aoi_successors(s, a))
    for (Index h = 0; h < nh; ++h) out.emplace_back(t * nh + h, p * h_probs_(h));
  return out;
}

VectorXd TabularMdp::channel_average(const VectorXd& v) const {
  const Index nh = space_.num_channel_matrices();
  const Eigen::Map<const MatrixXd> grid(v.data(), nh, space_.num_tau_states());
  return grid.transpose() * h_probs_;
}

MatrixXd q_from_v(const TabularMdp& mdp, const VectorXd& v) {
  const VectorXd vbar = mdp.channel_average(v);
  MatrixXd q(mdp.num_states(), mdp.num_actions());
  for (Index s = 0; s < mdp.num_states(); ++s) {
    for (Index k = 0; k < mdp.num_actions(); ++k) {
      double expect = 0.0;
      for (const auto& [t, p] : mdp.aoi_successors(s, mdp.actions()[k])) expect += p * vbar(t);
      q(s, k) = mdp.reward(s) + mdp.gamma() * expect;
    }
  }
  return q;
}

ValueTables value_iteration(const TabularMdp& mdp, double tol, int max_sweeps) {
  if (!(tol > 0)) throw std::invalid_argument("value_iteration: tol must be positive");
  const double gamma = mdp.gamma();
  const double target = tol * (1.0 - gamma) / gamma;

  // AoI successors do not depend on V; cache them once per (s, a).
  const Index ns = mdp.num_states();
  const Index na = mdp.num_actions();
  std::vector<std::vector<std::pair<Index, double>>> succ(static_cast<std::size_t>(ns * na));
  for (Index s = 0; s < ns; ++s)
    for (Index k = 0; k < na; ++k) succ[s * na + k] = mdp.aoi_successors(s, mdp.actions()[k]);

  ValueTables out;
  VectorXd v = VectorXd::Zero(ns);
  VectorXd next(ns);
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    const VectorXd vbar = mdp.channel_average(v);
    for (Index s = 0; s < ns; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (Index k = 0; k < na; ++k) {
        double expect = 0.0;
        for (const auto& [t, p] : succ[s * na + k]) expect += p * vbar(t);
        best = std::max(best, expect);
      }
      next(s) = mdp.reward(s) + gamma * best;
    }
    const double change = (next - v).cwiseAbs().maxCoeff();
    out.sweep_changes.push_back(change);
    v.swap(next);
    const double floor = 8.0 * std::numeric_limits<double>::epsilon() * v.cwiseAbs().maxCoeff();
    if (change < std::max(target, floor)) {
      out.sweeps = sweep;
      out.v = std::move(v);
      out.q = q_from_v(mdp, out.v);
      out.bellman_residual = (out.q.rowwise().maxCoeff() - out.v).cwiseAbs().maxCoeff();
      return out;
    }
  }
  std::ostringstream msg;
  msg << "value_iteration: no convergence within " << max_sweeps << " sweeps";
  throw ConvergenceError(msg.str());
}

Index greedy_action_index(const MatrixXd& q, Index s) {
  Index best = 0;
  for (Index k = 1; k < q.cols(); ++k)
    if (q(s, k) > q(s, best)) best = k;
  return best;
}

std::string to_string(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::kAoiValue: return "aoi_value";
    case Violation::Kind::kAoiQ: return "aoi_q";
    case Violation::Kind::kChannelUsed: return "channel_used";
    case Violation::Kind::kChannelUnused: return "channel_unused";
  }
  return "unknown";
}

std::vector<Violation> check_aoi_monotonicity(const ValueTables& tables, const TabularMdp& mdp, double eps) {
  std::vector<Violation> out;
  const StateSpace& space = mdp.space();
  for (Index s = 0; s < space.size(); ++s) {
    const SystemState base = space.state(s);
    for (int n = 0; n < space.num_devices(); ++n) {
      SystemState moved = base;
      for (int t = base.tau(n) + 1; t <= space.tau_max(); ++t) {
        moved.tau(n) = t;
        const Index sp = space.index(moved);
        const double dv = tables.v(sp) - tables.v(s);
        if (dv > eps) out.push_back({Violation::Kind::kAoiValue, s, sp, -1, dv});
        for (Index k = 0; k < mdp.num_actions(); ++k) {
          const double dq = tables.q(sp, k) - tables.q(s, k);
          if (dq > eps) out.push_back({Violation::Kind::kAoiQ, s, sp, k, dq});
        }
      }
    }
  }
  return out;
}

std::vector<Violation> check_channel_monotonicity(const ValueTables& tables, const TabularMdp& mdp, double eps) {
  std::vector<Violation> out;
  const StateSpace& space = mdp.space();
  for (Index s = 0; s < space.size(); ++s) {
    const SystemState base = space.state(s);
    for (int n = 0; n < space.num_devices(); ++n) {
      for (int m = 0; m < space.num_channels(); ++m) {
        SystemState moved = base;
        for (int h = base.h(n, m) + 1; h <= space.levels(); ++h) {
          moved.h(n, m) = h;
          const Index sp = space.index(moved);
          for (Index k = 0; k < mdp.num_actions(); ++k) {
            const double dq = tables.q(sp, k) - tables.q(s, k);
            if (mdp.actions()[k](n) == m + 1) {
              if (dq > eps) out.push_back({Violation::Kind::kChannelUsed, s, sp, k, dq});
            } else if (std::abs(dq) > eps) {
              out.push_back({Violation::Kind::kChannelUnused, s, sp, k, dq});
            }
          }
        }
      }
    }
  }
  return out;
}

PolicyEvaluation evaluate_policy(const Policy& policy, const SchedulingEnv& env, Rng& rng, int episodes, int horizon,
                                 double gamma) {
  if (horizon < 1) throw std::invalid_argument("evaluate_policy: horizon must be >= 1");
  if (episodes < 1) throw std::invalid_argument("evaluate_policy: need at least one episode");
  double sum_ret = 0.0, sum_ret2 = 0.0, sum_cost = 0.0, sum_cost2 = 0.0;
  for (int e = 0; e < episodes; ++e) {
    SystemState s = env.reset(rng);
    double ret = 0.0, discount = 1.0, cost = 0.0;
    for (int t = 0; t < horizon; ++t) {
      const ScheduleAction a = policy(s);
      StepOutcome out = env.step(s, a, rng);
      ret += discount * out.reward;
      cost -= out.reward;
      discount *= gamma;
      s = std::move(out.next_state);
    }
    cost /= horizon;
    sum_ret += ret;
    sum_ret2 += ret * ret;
    sum_cost += cost;
    sum_cost2 += cost * cost;
  }
  const double k = episodes;
  PolicyEvaluation r;
  r.avg_discounted_return = sum_ret / k;
  r.avg_sum_cost = sum_cost / k;
  if (episodes > 1) {
    const double var_ret = std::max(0.0, (sum_ret2 - k * r.avg_discounted_return * r.avg_discounted_return) / (k - 1));
    const double var_cost = std::max(0.0, (sum_cost2 - k * r.avg_sum_cost * r.avg_sum_cost) / (k - 1));
    r.discounted_return_stderr = std::sqrt(var_ret / k);
    r.sum_cost_stderr = std::sqrt(var_cost / k);
  }
  return r;
}

Policy greedy_policy(const TabularMdp& mdp, const MatrixXd& q) {
  return [&mdp, q](const SystemState& s) { return mdp.actions()[greedy_action_index(q, mdp.space().index(s))]; };
}

double expected_initial_value(const TabularMdp& mdp, const VectorXd& v) {
  const VectorXi ones = VectorXi::Ones(mdp.env().num_devices());
  return mdp.channel_average(v)(mdp.space().tau_index(ones));
}

}  // namespace monosched
