#pragma once

// Exact tabular treatment of small scheduling instances: state/action
// enumeration, value iteration, and brute-force checks of the Q-function
// monotonicity properties in AoI and channel states.

#include <functional>
#include <string>
#include <vector>

#include "monosched/env.hpp"

namespace monosched {

/// Feasible schedules in lexicographic order of the action vector.
/// Count is N (N-1) ... (N-M+1). Throws std::invalid_argument if M > N.
std::vector<ScheduleAction> enumerate_actions(int num_devices, int num_channels);

/// Enumerated state space with a bijective index. States are ordered
/// lexicographically with tau (device 0 most significant) ahead of H (row-major):
///   index = tau_index * num_channel_matrices + h_index.
class StateSpace {
 public:
  StateSpace(int num_devices, int num_channels, int tau_max, int levels, double limit = 5e6);

  Index size() const { return num_tau_ * num_h_; }
  Index num_tau_states() const { return num_tau_; }
  Index num_channel_matrices() const { return num_h_; }
  int num_devices() const { return num_devices_; }
  int num_channels() const { return num_channels_; }
  int tau_max() const { return tau_max_; }
  int levels() const { return levels_; }

  SystemState state(Index i) const;
  Index index(const SystemState& s) const;
  Index tau_index(const VectorXi& tau) const;
  Index h_index(const ChannelMatrix& h) const;
  ChannelMatrix channel_matrix(Index h_index) const;

 private:
  int num_devices_;
  int num_channels_;
  int tau_max_;
  int levels_;
  Index num_tau_;
  Index num_h_;
};

/// Convenience wrapper returning every state in index order.
std::vector<SystemState> enumerate_states(int num_devices, int num_channels, int tau_max, int levels,
                                          double limit = 5e6);

class TabularMdp {
 public:
  /// The environment's AoI cap doubles as the enumeration bound.
  TabularMdp(SchedulingEnv env, double gamma, double limit = 5e6);

  const SchedulingEnv& env() const { return env_; }
  const StateSpace& space() const { return space_; }
  const std::vector<ScheduleAction>& actions() const { return actions_; }
  double gamma() const { return gamma_; }
  Index num_states() const { return space_.size(); }
  Index num_actions() const { return static_cast<Index>(actions_.size()); }
  double reward(Index s) const { return rewards_(s); }
  const VectorXd& rewards() const { return rewards_; }
  /// Pr(H) for each channel-matrix index.
  const VectorXd& channel_probs() const { return h_probs_; }

  /// Next-AoI outcomes (tau index, probability) for state s under action a.
  std::vector<std::pair<Index, double>> aoi_successors(Index s, const ScheduleAction& a) const;

  /// Full successor distribution (state index, probability), channel outcomes included.
  std::vector<std::pair<Index, double>> successors(Index s, const ScheduleAction& a) const;

  /// Channel-averaged value: Vbar(tau) = sum_H Pr(H) V(tau, H).
  VectorXd channel_average(const VectorXd& v) const;

 private:
  SchedulingEnv env_;
  double gamma_;
  StateSpace space_;
  std::vector<ScheduleAction> actions_;
  VectorXd rewards_;
  VectorXd h_probs_;
};

struct ValueTables {
  VectorXd v;  // per state
  MatrixXd q;  // states x actions
  int sweeps = 0;
  double bellman_residual = 0.0;
  std::vector<double> sweep_changes;  // sup-norm change of V per sweep
};

/// Q(s, a) = r(s) + gamma sum_{s+} P(s+ | s, a) V(s+).
MatrixXd q_from_v(const TabularMdp& mdp, const VectorXd& v);

/// Iterates V <- max_a Q until the sup-norm change drops below tol (1 - gamma) / gamma,
/// or below the round-off floor 8 eps max|V| once that is larger. Throws ConvergenceError
/// after max_sweeps.
ValueTables value_iteration(const TabularMdp& mdp, double tol = 1e-12, int max_sweeps = 1000000);

/// Index of the best action at state s (ties -> lowest action index).
Index greedy_action_index(const MatrixXd& q, Index s);

struct Violation {
  enum class Kind { kAoiValue, kAoiQ, kChannelUsed, kChannelUnused };
  Kind kind;
  Index state;      // base state s
  Index perturbed;  // s'
  Index action;     // -1 for V checks
  double gap;       // Q(s') - Q(s) (or V)
};

std::string to_string(Violation::Kind kind);

/// Flags V(s'_AoI) > V(s) + eps and Q(s'_AoI, a) > Q(s, a) + eps for every tau'_n > tau_n.
std::vector<Violation> check_aoi_monotonicity(const ValueTables& tables, const TabularMdp& mdp,
                                              double eps = 1e-9);

/// For every h'_{n,m} > h_{n,m}: if a(n) uses channel m flags Q(s'_Ch, a) > Q(s, a) + eps,
/// otherwise flags |Q(s'_Ch, a) - Q(s, a)| > eps.
std::vector<Violation> check_channel_monotonicity(const ValueTables& tables, const TabularMdp& mdp,
                                                  double eps = 1e-9);

using Policy = std::function<ScheduleAction(const SystemState&)>;

struct PolicyEvaluation {
  double avg_discounted_return = 0.0;
  double discounted_return_stderr = 0.0;
  double avg_sum_cost = 0.0;  // time-average of sum_n g_n(tau_n)
  double sum_cost_stderr = 0.0;
};

/// Monte Carlo evaluation from env.reset(); returns are sum_t gamma^t r(s_t), t = 0..horizon-1.
PolicyEvaluation evaluate_policy(const Policy& policy, const SchedulingEnv& env, Rng& rng, int episodes,
                                 int horizon, double gamma);

/// Greedy policy reading actions off a tabulated Q.
Policy greedy_policy(const TabularMdp& mdp, const MatrixXd& q);

/// Expected V at the reset distribution: sum_H Pr(H) V(tau = 1, H).
double expected_initial_value(const TabularMdp& mdp, const VectorXd& v);

}  // namespace monosched
