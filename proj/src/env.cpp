#include "monosched/env.hpp"

#include <algorithm>
#include <ostream>

namespace monosched {

bool validate_action(const VectorXi& a, int num_devices, int num_channels) {
  if (a.size() != num_devices) return false;
  std::vector<int> uses(static_cast<std::size_t>(num_channels) + 1, 0);
  for (Index n = 0; n < a.size(); ++n) {
    if (a(n) < 0 || a(n) > num_channels) return false;
    ++uses[a(n)];
  }
  for (int m = 1; m <= num_channels; ++m)
    if (uses[m] != 1) return false;
  return true;
}

double sum_cost(const SystemState& state, const std::vector<CostModel>& costs) {
  double total = 0.0;
  for (Index n = 0; n < state.tau.size(); ++n) total += costs[n](state.tau(n));
  return total;
}

double reward(const SystemState& state, const std::vector<CostModel>& costs) { return -sum_cost(state, costs); }

VectorXd encode_state(const SystemState& state, int tau_norm, int levels) {
  const Index n_dev = state.tau.size();
  const Index n_ch = state.h.cols();
  VectorXd x(n_dev * (n_ch + 1));
  x.head(n_dev) = state.tau.cast<double>() / static_cast<double>(tau_norm);
  for (Index n = 0; n < n_dev; ++n)
    for (Index m = 0; m < n_ch; ++m)
      x(n_dev + n * n_ch + m) = static_cast<double>(state.h(n, m)) / static_cast<double>(levels);
  return x;
}

SchedulingEnv::SchedulingEnv(ChannelModel channel, std::vector<CostModel> costs, int tau_cap)
    : channel_(std::move(channel)), costs_(std::move(costs)), tau_cap_(tau_cap) {
  if (static_cast<int>(costs_.size()) != channel_.num_devices())
    throw std::invalid_argument("SchedulingEnv: need one cost model per device");
  if (tau_cap_ < 2) throw std::invalid_argument("SchedulingEnv: AoI cap must be >= 2");
  if (channel_.num_channels() > channel_.num_devices())
    throw std::invalid_argument("SchedulingEnv: more channels than devices");
}

SystemState SchedulingEnv::reset(Rng& rng) const {
  return {VectorXi::Ones(num_devices()), channel_.sample(rng)};
}

StepOutcome SchedulingEnv::step(const SystemState& state, const ScheduleAction& action, Rng& rng) const {
  if (!validate_action(action, num_devices(), num_channels()))
    throw ContractViolation("SchedulingEnv::step: infeasible schedule");
  StepOutcome out;
  out.reward = reward(state);
  out.delivered.assign(num_devices(), false);
  out.next_state.tau.resize(num_devices());
  for (int n = 0; n < num_devices(); ++n) {
    bool ok = false;
    if (action(n) > 0) {
      const int m = action(n) - 1;
      const double p = channel_.drop_probability(n, m, state.h(n, m));
      ok = uniform01(rng) >= p;
    }
    out.delivered[n] = ok;
    out.next_state.tau(n) = ok ? 1 : std::min(state.tau(n) + 1, tau_cap_);
  }
  out.next_state.h = channel_.sample(rng);
  return out;
}

double SchedulingEnv::transition_prob(const SystemState& state, const ScheduleAction& action,
                                      const SystemState& next) const {
  double prob = 1.0;
  for (int n = 0; n < num_devices(); ++n) {
    const int aged = std::min(state.tau(n) + 1, tau_cap_);
    const int t = next.tau(n);
    if (action(n) == 0) {
      if (t != aged) return 0.0;
      continue;
    }
    const int m = action(n) - 1;
    const double p = channel_.drop_probability(n, m, state.h(n, m));
    if (t == 1) {
      prob *= 1.0 - p;
    } else if (t == aged) {
      prob *= p;
    } else {
      return 0.0;
    }
  }
  return prob * channel_.matrix_probability(next.h);
}

void write_trajectory_header(std::ostream& out, int num_devices, int num_channels) {
  out << "t";
  for (int n = 0; n < num_devices; ++n) out << ",tau" << n;
  for (int n = 0; n < num_devices; ++n)
    for (int m = 0; m < num_channels; ++m) out << ",h" << n << '_' << m;
  for (int n = 0; n < num_devices; ++n) out << ",a" << n;
  out << ",reward\n";
}

void write_trajectory_row(std::ostream& out, int t, const SystemState& state, const ScheduleAction& action,
                          double reward) {
  out << t;
  for (Index n = 0; n < state.tau.size(); ++n) out << ',' << state.tau(n);
  for (Index n = 0; n < state.h.rows(); ++n)
    for (Index m = 0; m < state.h.cols(); ++m) out << ',' << state.h(n, m);
  for (Index n = 0; n < action.size(); ++n) out << ',' << action(n);
  out.precision(17);
  out << ',' << reward << '\n';
}

}  // namespace monosched
