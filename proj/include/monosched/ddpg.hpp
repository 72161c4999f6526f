#pragma once

// DDPG for the scheduling MDP, with four critic-training variants:
//   baseline  plain MLP critic, TD loss only
//   ma        MonotoneCritic, sign projection after every critic step
//   mri       MLP critic, TD loss + sampled positive-derivative penalty
//   mrii      MLP critic, TD loss + sampled positive-increment penalty
//
// The actor emits a continuous vector in [0, M]^N; project_action() repairs it
// into a feasible schedule when acting. The critic always sees actions encoded
// as a / M, so the actor's sigmoid output feeds the critic directly.

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "monosched/env.hpp"
#include "monosched/exact.hpp"
#include "monosched/neural.hpp"

namespace monosched {

enum class Variant { kBaseline, kMonotoneArchitecture, kDerivativePenalty, kIncrementPenalty };

std::string to_string(Variant v);
/// Accepts "ddpg"/"baseline", "ma", "mri", "mrii" (case-insensitive, optional "-ddpg" suffix).
Variant variant_from_string(const std::string& s);

enum class TdTargetMode { kTargetActor, kExactMax };

std::string to_string(TdTargetMode m);
TdTargetMode td_mode_from_string(const std::string& s);

struct Transition {
  VectorXd s;                 // encoded state
  VectorXd a_raw;             // actor output after noise, in [0, M]^N
  ScheduleAction a;           // projected feasible schedule
  double r = 0.0;             // reward(raw_state), unscaled
  VectorXd s_next;            // encoded next state
  SystemState raw_state;      // kept for effective sets and increments
  SystemState raw_next_state;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t inserted() const { return inserted_; }
  const Transition& operator[](std::size_t i) const { return items_[i]; }

  /// Uniform sample of `batch` distinct slots (Floyd's algorithm).
  std::vector<std::size_t> sample(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t inserted_ = 0;
  std::vector<Transition> items_;
};

struct TrainConfig {
  double gamma = 0.95;
  int batch = 128;
  int replay_capacity = 20000;
  double lr_actor = 1e-4;
  double lr_critic = 1e-3;
  double lr_decay = 1e-3;  // lr_e = lr_0 / (1 + lr_decay * e)
  double delta = 0.005;
  int episodes = 300;
  int horizon = 500;
  int penalty_samples = 2;  // K
  double penalty_weight = 1.0;
  Variant variant = Variant::kBaseline;
  double noise_start = 0.5;  // exploration std as a fraction of M
  double noise_end = 0.05;
  double noise_decay_fraction = 0.5;  // of the episodes, for the linear decay
  TdTargetMode td_mode = TdTargetMode::kTargetActor;
  int warmup_batches = 10;  // no updates until the buffer holds warmup_batches * batch
  std::vector<int> actor_hidden{64, 64};
  std::vector<int> critic_hidden{64, 64};
  int monotone_state_hidden = 64;
  int monotone_action_hidden = 64;
  double reward_scale = 1.0;  // rewards are multiplied by this inside TD targets
  int exact_max_limit = 1000;  // max feasible actions for exact_max targets
  // Critic input for stored transitions: a_raw / M (the behaviour action, default)
  // or the encoded projected schedule. The two agree on feasible schedules.
  bool critic_raw_action = true;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct Agent {
  int num_devices = 0;
  int num_channels = 0;
  nn::Mlp<double> actor;
  nn::Mlp<double> target_actor;
  nn::Critic<double> critic;
  nn::Critic<double> target_critic;
  nn::AdamState<double> actor_opt;
  nn::AdamState<double> critic_opt;

  /// Fresh networks for the config's variant; targets start as copies.
  static Agent create(const TrainConfig& config, int num_devices, int num_channels, Rng& init_rng);

  int state_dim() const { return num_devices * (num_channels + 1); }
};

/// M * actor(s), no noise.
VectorXd actor_action(const Agent& agent, const VectorXd& s_enc);

/// M * actor(s) + N(0, sigma^2) noise, clipped to [0, M].
VectorXd select_action(const Agent& agent, const VectorXd& s_enc, double noise_sigma, Rng& rng);

/// Deterministic repair to a feasible schedule: device n prefers round(raw_n);
/// a contested channel keeps the device closest to it (ties -> lowest index);
/// each channel left unassigned goes, in channel order, to the idle device with
/// the largest raw value (ties -> lowest index).
ScheduleAction project_action(const VectorXd& raw, int num_devices, int num_channels);

/// a_n / M per coordinate.
VectorXd encode_action(const ScheduleAction& a, int num_channels);

/// Bootstrapped targets y_i = scale * r_i + gamma * Q_target(s_next_i, a_next_i) for a batch.
VectorXd td_targets(const Agent& agent, const std::vector<const Transition*>& batch, const TrainConfig& config);

/// Single-transition form of td_targets.
double td_target(const Agent& agent, const Transition& t, const TrainConfig& config);

/// All AoI coordinates 0..N-1 plus the encoded channel coordinates the action uses.
std::vector<Index> effective_set(const SystemState& raw_state, const ScheduleAction& a, int num_devices,
                                 int num_channels);

/// Uniform sample without replacement of min(K, |J|) members of J.
std::vector<Index> sample_penalty_indices(const std::vector<Index>& set, int k, Rng& rng);

/// sum_{j in indices} max(0, dQ/ds_j) via one reverse pass.
double penalty_type1(const nn::Critic<double>& critic, const VectorXd& s_enc, const VectorXd& a_enc,
                     const std::vector<Index>& indices);

using StateEncoder = std::function<VectorXd(const SystemState&)>;

/// State after a one-step raw increment of encoded coordinate j: AoI index j -> tau_j + 1
/// (not capped), channel index -> level + 1. Returns false when the channel is already at
/// the top level.
bool increment_state(const SystemState& raw_state, Index j, int levels, SystemState& out);

/// sum_{j in indices} max(0, Q(s'_j, a) - Q(s, a)) using forward passes only; channel
/// coordinates already at the top level are skipped.
double penalty_type2(const nn::Critic<double>& critic, const SystemState& raw_state, const VectorXd& a_enc,
                     const std::vector<Index>& indices, const StateEncoder& encoder, int levels);

struct UpdateStats {
  double loss = 0.0;     // td_loss + weight * penalty
  double td_loss = 0.0;  // mean TD^2
  double penalty = 0.0;  // mean per-sample penalty
};

/// One critic step on the batch. Uses penalty_rng to draw the sampled index sets.
UpdateStats critic_update(Agent& agent, const std::vector<const Transition*>& batch, const TrainConfig& config,
                          double lr, const SchedulingEnv& env, Rng& penalty_rng);

/// Gradient of -mean Q(s, actor(s)) w.r.t. the actor parameters; the loss goes to *loss.
VectorXd actor_gradient(const Agent& agent, const std::vector<const Transition*>& batch, double* loss = nullptr);

/// One deterministic-policy-gradient step; returns -mean Q(s, actor(s)).
double actor_update(Agent& agent, const std::vector<const Transition*>& batch, double lr);

struct EpisodeMetrics {
  int episode = 0;
  double avg_sum_cost = 0.0;  // time-average of sum_n g_n(tau_n) over the episode
  double critic_loss = 0.0;   // means over the episode's updates (0 before warmup)
  double actor_loss = 0.0;
  double penalty = 0.0;
  int updates = 0;
  double wall_seconds = 0.0;
};

using MetricsSink = std::function<void(const EpisodeMetrics&)>;

/// Called once per environment step with the pre-transition state and the executed schedule.
using StepSink = std::function<void(int episode, int t, const SystemState&, const ScheduleAction&, double reward)>;

class TrainingDivergedError : public std::runtime_error {
 public:
  TrainingDivergedError(const std::string& what, int episode) : std::runtime_error(what), episode_(episode) {}
  int episode() const { return episode_; }

 private:
  int episode_;
};

struct TrainRngs {
  Rng env;
  Rng explore;
  Rng replay;
  Rng penalty;
};

/// Runs config.episodes episodes of interaction and learning. Throws
/// TrainingDivergedError when a parameter becomes non-finite.
void train(Agent& agent, const SchedulingEnv& env, const TrainConfig& config, TrainRngs& rngs,
           const MetricsSink& sink = {}, const StepSink& steps = {});

/// Noise-free actor followed by project_action.
Policy actor_policy(const Agent& agent, const SchedulingEnv& env);

}  // namespace monosched
