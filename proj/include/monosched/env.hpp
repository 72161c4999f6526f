#pragma once

// Scheduling MDP: state (tau, H), feasible channel assignments, stochastic step
// dynamics and reward.
//
// Action convention: a(n) = 0 leaves device n idle, a(n) = m in {1..M} sends it
// on channel m, i.e. column m-1 of H. Every channel is assigned to exactly one
// device and each device uses at most one channel.

#include <iosfwd>
#include <vector>

#include "monosched/channel.hpp"
#include "monosched/estimation.hpp"

namespace monosched {

struct SystemState {
  VectorXi tau;     // AoI per device, entries >= 1
  ChannelMatrix h;  // N x M channel levels

  int num_devices() const { return static_cast<int>(tau.size()); }
  friend bool operator==(const SystemState& a, const SystemState& b) {
    return a.tau.size() == b.tau.size() && a.h.rows() == b.h.rows() && a.h.cols() == b.h.cols() &&
           a.tau == b.tau && a.h == b.h;
  }
};

/// Per-device channel choice; see the convention above.
using ScheduleAction = VectorXi;

struct StepOutcome {
  SystemState next_state;
  double reward = 0.0;
  std::vector<bool> delivered;
};

/// True iff every entry is in {0..M}, each channel 1..M occurs exactly once.
bool validate_action(const VectorXi& a, int num_devices, int num_channels);

/// -sum_n g_n(tau_n).
double reward(const SystemState& state, const std::vector<CostModel>& costs);

/// Average sum cost sum_n g_n(tau_n) (the negated reward).
double sum_cost(const SystemState& state, const std::vector<CostModel>& costs);

/// Encoded state: tau_n / tau_norm for each device, then h_{n,m} / levels in
/// row-major (n, m) order. Length N (M + 1).
VectorXd encode_state(const SystemState& state, int tau_norm, int levels);

/// Index of channel entry (n, m) in the encoded state vector.
inline Index channel_feature_index(int num_devices, int num_channels, int n, int m) {
  return num_devices + static_cast<Index>(n) * num_channels + m;
}

/// Environment bundle: channels, per-device cost tables and the AoI cap.
class SchedulingEnv {
 public:
  SchedulingEnv(ChannelModel channel, std::vector<CostModel> costs, int tau_cap);

  int num_devices() const { return channel_.num_devices(); }
  int num_channels() const { return channel_.num_channels(); }
  int levels() const { return channel_.levels(); }
  int tau_cap() const { return tau_cap_; }
  const ChannelModel& channel() const { return channel_; }
  const std::vector<CostModel>& costs() const { return costs_; }

  /// All-fresh AoI (tau = 1) and a freshly sampled channel matrix.
  SystemState reset(Rng& rng) const;

  /// Reward is that of the current state; next AoI saturates at tau_cap.
  /// Throws ContractViolation on an infeasible action.
  StepOutcome step(const SystemState& state, const ScheduleAction& action, Rng& rng) const;

  /// Pr(next | state, action) in product form, AoI capped at tau_cap.
  double transition_prob(const SystemState& state, const ScheduleAction& action,
                         const SystemState& next) const;

  double reward(const SystemState& state) const { return monosched::reward(state, costs_); }
  double sum_cost(const SystemState& state) const { return monosched::sum_cost(state, costs_); }
  VectorXd encode(const SystemState& state) const { return encode_state(state, tau_cap_, levels()); }

 private:
  ChannelModel channel_;
  std::vector<CostModel> costs_;
  int tau_cap_;
};

/// Writes one trajectory CSV row: t, tau..., h (row-major)..., a..., reward.
void write_trajectory_header(std::ostream& out, int num_devices, int num_channels);
void write_trajectory_row(std::ostream& out, int t, const SystemState& state, const ScheduleAction& action,
                          double reward);

}  // namespace monosched
