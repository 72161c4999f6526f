#include "monosched/ddpg.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <sstream>

namespace monosched {

namespace {

using nn::Mat;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

double feasible_action_count(int n, int m) {
  double count = 1.0;
  for (int i = 0; i < m; ++i) count *= static_cast<double>(n - i);
  return count;
}

Mat<double> stack_columns(const std::vector<const Transition*>& batch, VectorXd Transition::*field) {
  const Index rows = (batch.front()->*field).size();
  Mat<double> out(rows, static_cast<Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) out.col(static_cast<Index>(i)) = batch[i]->*field;
  return out;
}

Mat<double> stack_actions(const std::vector<const Transition*>& batch, int num_channels, bool raw) {
  Mat<double> out(batch.front()->a.size(), static_cast<Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i)
    out.col(static_cast<Index>(i)) =
        raw ? VectorXd(batch[i]->a_raw / num_channels) : encode_action(batch[i]->a, num_channels);
  return out;
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "ddpg";
    case Variant::kMonotoneArchitecture: return "ma";
    case Variant::kDerivativePenalty: return "mri";
    case Variant::kIncrementPenalty: return "mrii";
  }
  return "ddpg";
}

Variant variant_from_string(const std::string& s) {
  std::string key = lower(s);
  const std::string suffix = "-ddpg";
  if (key.size() > suffix.size() && key.compare(key.size() - suffix.size(), suffix.size(), suffix) == 0)
    key.resize(key.size() - suffix.size());
  if (key == "ddpg" || key == "baseline") return Variant::kBaseline;
  if (key == "ma") return Variant::kMonotoneArchitecture;
  if (key == "mri") return Variant::kDerivativePenalty;
  if (key == "mrii") return Variant::kIncrementPenalty;
  throw std::invalid_argument("unknown variant '" + s + "' (expected ddpg, ma, mri or mrii)");
}

std::string to_string(TdTargetMode m) { return m == TdTargetMode::kExactMax ? "exact_max" : "target_actor"; }

TdTargetMode td_mode_from_string(const std::string& s) {
  const std::string key = lower(s);
  if (key == "target_actor") return TdTargetMode::kTargetActor;
  if (key == "exact_max") return TdTargetMode::kExactMax;
  throw std::invalid_argument("unknown td_target_mode '" + s + "' (expected target_actor or exact_max)");
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[inserted_ % capacity_] = std::move(t);
  }
  ++inserted_;
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  const std::size_t n = items_.size();
  if (batch > n) throw std::invalid_argument("ReplayBuffer::sample: batch larger than buffer");
  std::vector<std::size_t> out;
  out.reserve(batch);
  for (std::size_t j = n - batch; j < n; ++j) {
    const std::size_t t = static_cast<std::size_t>(uniform_index(rng, j + 1));
    if (std::find(out.begin(), out.end(), t) == out.end()) {
      out.push_back(t);
    } else {
      out.push_back(j);
    }
  }
  return out;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("train." + field + ": " + why);
  };
  if (!(gamma > 0 && gamma < 1)) fail("gamma", "must lie in (0, 1)");
  if (batch < 1) fail("batch", "must be positive");
  if (replay_capacity < batch) fail("replay_capacity", "must be at least the batch size");
  if (!(lr_actor > 0)) fail("lr_actor", "must be positive");
  if (!(lr_critic > 0)) fail("lr_critic", "must be positive");
  if (!(lr_decay >= 0)) fail("lr_decay", "must be non-negative");
  if (!(delta > 0 && delta <= 1)) fail("delta", "must lie in (0, 1]");
  if (episodes < 0) fail("episodes", "must be non-negative");
  if (horizon < 1) fail("horizon", "must be positive");
  if (penalty_samples < 0) fail("penalty_samples", "must be non-negative");
  if (!(penalty_weight >= 0)) fail("penalty_weight", "must be non-negative");
  if (!(noise_start >= 0) || !(noise_end >= 0)) fail("noise", "must be non-negative");
  if (!(noise_decay_fraction > 0)) fail("noise_decay_fraction", "must be positive");
  if (warmup_batches < 1) fail("warmup_batches", "must be positive");
  if (monotone_state_hidden < 1) fail("monotone_state_hidden", "must be positive");
  if (monotone_action_hidden < 1) fail("monotone_action_hidden", "must be positive");
  if (!(reward_scale > 0)) fail("reward_scale", "must be positive");
  for (int w : actor_hidden)
    if (w < 1) fail("actor_hidden", "widths must be positive");
  for (int w : critic_hidden)
    if (w < 1) fail("critic_hidden", "widths must be positive");
}

Agent Agent::create(const TrainConfig& config, int num_devices, int num_channels, Rng& init_rng) {
  if (num_channels < 1 || num_channels > num_devices)
    throw std::invalid_argument("Agent::create: need 1 <= M <= N");
  Agent agent;
  agent.num_devices = num_devices;
  agent.num_channels = num_channels;
  const int ds = agent.state_dim();
  agent.actor = nn::Mlp<double>::make(ds, config.actor_hidden, num_devices, nn::Activation::kRelu,
                                      nn::Activation::kSigmoid);
  agent.actor.initialize(init_rng);
  if (config.variant == Variant::kMonotoneArchitecture) {
    agent.critic = nn::Critic<double>(nn::MonotoneCritic<double>(ds, config.monotone_state_hidden, num_devices,
                                                                 config.monotone_action_hidden));
  } else {
    agent.critic = nn::Critic<double>(nn::Mlp<double>::make(ds + num_devices, config.critic_hidden, 1,
                                                            nn::Activation::kRelu, nn::Activation::kIdentity),
                                      ds);
  }
  agent.critic.initialize(init_rng);
  agent.target_actor = agent.actor;
  agent.target_critic = agent.critic;
  agent.actor_opt = nn::AdamState<double>(agent.actor.num_params());
  agent.critic_opt = nn::AdamState<double>(agent.critic.num_params());
  return agent;
}

VectorXd actor_action(const Agent& agent, const VectorXd& s_enc) {
  return agent.num_channels * agent.actor.forward(s_enc).col(0);
}

VectorXd select_action(const Agent& agent, const VectorXd& s_enc, double noise_sigma, Rng& rng) {
  VectorXd raw = actor_action(agent, s_enc);
  if (noise_sigma > 0) {
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (Index i = 0; i < raw.size(); ++i) raw(i) += noise(rng);
  }
  return raw.cwiseMax(0.0).cwiseMin(static_cast<double>(agent.num_channels));
}

ScheduleAction project_action(const VectorXd& raw, int num_devices, int num_channels) {
  if (raw.size() != num_devices) throw std::invalid_argument("project_action: raw vector has wrong length");
  ScheduleAction a(num_devices);
  for (int n = 0; n < num_devices; ++n) {
    const double v = std::clamp(raw(n), 0.0, static_cast<double>(num_channels));
    a(n) = static_cast<int>(std::lround(v));
  }
  for (int m = 1; m <= num_channels; ++m) {
    int keep = -1;
    for (int n = 0; n < num_devices; ++n) {
      if (a(n) != m) continue;
      if (keep < 0 || std::abs(raw(n) - m) < std::abs(raw(keep) - m)) keep = n;
    }
    for (int n = 0; n < num_devices; ++n)
      if (a(n) == m && n != keep) a(n) = 0;
  }
  for (int m = 1; m <= num_channels; ++m) {
    bool taken = false;
    for (int n = 0; n < num_devices && !taken; ++n) taken = a(n) == m;
    if (taken) continue;
    int pick = -1;
    for (int n = 0; n < num_devices; ++n) {
      if (a(n) != 0) continue;
      if (pick < 0 || raw(n) > raw(pick)) pick = n;
    }
    a(pick) = m;
  }
  return a;
}

VectorXd encode_action(const ScheduleAction& a, int num_channels) {
  return a.cast<double>() / static_cast<double>(num_channels);
}

VectorXd td_targets(const Agent& agent, const std::vector<const Transition*>& batch, const TrainConfig& config) {
  const Index b = static_cast<Index>(batch.size());
  const Mat<double> s_next = stack_columns(batch, &Transition::s_next);
  VectorXd r(b);
  for (Index i = 0; i < b; ++i) r(i) = batch[i]->r;

  VectorXd q_next(b);
  if (config.td_mode == TdTargetMode::kTargetActor) {
    const Mat<double> out = agent.target_actor.forward(s_next);
    Mat<double> a_next(agent.num_devices, b);
    for (Index i = 0; i < b; ++i) {
      const ScheduleAction a = project_action(agent.num_channels * out.col(i), agent.num_devices, agent.num_channels);
      a_next.col(i) = encode_action(a, agent.num_channels);
    }
    q_next = agent.target_critic.forward(s_next, a_next).row(0).transpose();
  } else {
    const double count = feasible_action_count(agent.num_devices, agent.num_channels);
    if (count > config.exact_max_limit) {
      std::ostringstream msg;
      msg << "td_targets: exact_max needs " << count << " feasible actions, limit is " << config.exact_max_limit;
      throw CapacityError(msg.str());
    }
    q_next.setConstant(-std::numeric_limits<double>::infinity());
    for (const ScheduleAction& a : enumerate_actions(agent.num_devices, agent.num_channels)) {
      const Mat<double> a_enc = encode_action(a, agent.num_channels).replicate(1, b);
      q_next = q_next.cwiseMax(agent.target_critic.forward(s_next, a_enc).row(0).transpose());
    }
  }
  return config.reward_scale * r + config.gamma * q_next;
}

double td_target(const Agent& agent, const Transition& t, const TrainConfig& config) {
  return td_targets(agent, {&t}, config)(0);
}

std::vector<Index> effective_set(const SystemState& raw_state, const ScheduleAction& a, int num_devices,
                                 int num_channels) {
  (void)raw_state;
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(num_devices + num_channels));
  for (int n = 0; n < num_devices; ++n) out.push_back(n);
  for (int n = 0; n < num_devices; ++n)
    if (a(n) > 0) out.push_back(channel_feature_index(num_devices, num_channels, n, a(n) - 1));
  return out;
}

std::vector<Index> sample_penalty_indices(const std::vector<Index>& set, int k, Rng& rng) {
  if (k < 0) throw std::invalid_argument("sample_penalty_indices: K must be non-negative");
  if (static_cast<std::size_t>(k) >= set.size()) return set;
  std::vector<Index> pool = set;
  for (int i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

double penalty_type1(const nn::Critic<double>& critic, const VectorXd& s_enc, const VectorXd& a_enc,
                     const std::vector<Index>& indices) {
  nn::Critic<double>::Cache cache;
  critic.forward(s_enc, a_enc, &cache);
  const Mat<double> ds = critic.input_gradient(cache, Mat<double>::Ones(1, 1)).first;
  double total = 0.0;
  for (Index j : indices) total += std::max(0.0, ds(j, 0));
  return total;
}

bool increment_state(const SystemState& raw_state, Index j, int levels, SystemState& out) {
  const Index n_dev = raw_state.tau.size();
  out = raw_state;
  if (j < n_dev) {
    out.tau(j) += 1;
    return true;
  }
  const Index n_ch = raw_state.h.cols();
  const Index idx = j - n_dev;
  const Index n = idx / n_ch;
  const Index m = idx % n_ch;
  if (out.h(n, m) >= levels) return false;
  out.h(n, m) += 1;
  return true;
}

double penalty_type2(const nn::Critic<double>& critic, const SystemState& raw_state, const VectorXd& a_enc,
                     const std::vector<Index>& indices, const StateEncoder& encoder, int levels) {
  const double q = critic.forward(encoder(raw_state), a_enc)(0, 0);
  double total = 0.0;
  SystemState moved;
  for (Index j : indices) {
    if (!increment_state(raw_state, j, levels, moved)) continue;
    total += std::max(0.0, critic.forward(encoder(moved), a_enc)(0, 0) - q);
  }
  return total;
}

UpdateStats critic_update(Agent& agent, const std::vector<const Transition*>& batch, const TrainConfig& config,
                          double lr, const SchedulingEnv& env, Rng& penalty_rng) {
  const Index b = static_cast<Index>(batch.size());
  const int n_dev = agent.num_devices;
  const int n_ch = agent.num_channels;
  const VectorXd y = td_targets(agent, batch, config);
  const Mat<double> s = stack_columns(batch, &Transition::s);
  const Mat<double> a = stack_actions(batch, n_ch, config.critic_raw_action);

  nn::Critic<double>::Cache cache;
  const Mat<double> q = agent.critic.forward(s, a, &cache);
  const VectorXd td = y - q.row(0).transpose();

  UpdateStats stats;
  stats.td_loss = td.squaredNorm() / static_cast<double>(b);
  Mat<double> dq = (-2.0 / static_cast<double>(b)) * td.transpose();
  VectorXd grad = VectorXd::Zero(agent.critic.num_params());
  const double pw = config.penalty_weight / static_cast<double>(b);
  double penalty_sum = 0.0;

  if (config.variant == Variant::kDerivativePenalty && config.penalty_samples > 0) {
    const Mat<double> qd = agent.critic.input_gradient(cache, Mat<double>::Ones(1, b)).first;
    std::vector<Index> cols, idx;
    for (Index i = 0; i < b; ++i) {
      const Transition& t = *batch[i];
      const auto chosen =
          sample_penalty_indices(effective_set(t.raw_state, t.a, n_dev, n_ch), config.penalty_samples, penalty_rng);
      for (Index j : chosen) {
        if (qd(j, i) > 0) {
          penalty_sum += qd(j, i);
          cols.push_back(i);
          idx.push_back(j);
        }
      }
    }
    if (!cols.empty() && pw > 0) {
      const Mat<double> weights = Mat<double>::Constant(1, static_cast<Index>(cols.size()), pw);
      agent.critic.state_derivative_backward(cache, cols, idx, weights, grad);
    }
  }

  nn::Critic<double>::Cache inc_cache;
  Mat<double> dq_inc;
  if (config.variant == Variant::kIncrementPenalty && config.penalty_samples > 0) {
    std::vector<Index> owner;
    std::vector<VectorXd> moved_enc;
    SystemState moved;
    for (Index i = 0; i < b; ++i) {
      const Transition& t = *batch[i];
      std::vector<Index> set;
      for (Index j : effective_set(t.raw_state, t.a, n_dev, n_ch)) {
        if (j >= n_dev) {
          const Index c = j - n_dev;
          if (t.raw_state.h(c / n_ch, c % n_ch) >= env.levels()) continue;
        }
        set.push_back(j);
      }
      for (Index j : sample_penalty_indices(set, config.penalty_samples, penalty_rng)) {
        increment_state(t.raw_state, j, env.levels(), moved);
        owner.push_back(i);
        moved_enc.push_back(env.encode(moved));
      }
    }
    if (!owner.empty()) {
      const Index p = static_cast<Index>(owner.size());
      Mat<double> sp(s.rows(), p), ap(a.rows(), p);
      for (Index c = 0; c < p; ++c) {
        sp.col(c) = moved_enc[c];
        ap.col(c) = a.col(owner[c]);
      }
      const Mat<double> qp = agent.critic.forward(sp, ap, &inc_cache);
      dq_inc = Mat<double>::Zero(1, p);
      for (Index c = 0; c < p; ++c) {
        const double qi = qp(0, c) - q(0, owner[c]);
        if (qi > 0) {
          penalty_sum += qi;
          dq_inc(0, c) = pw;
          dq(0, owner[c]) -= pw;
        }
      }
    }
  }

  agent.critic.backward(cache, dq, grad);
  if (dq_inc.size() > 0 && pw > 0) agent.critic.backward(inc_cache, dq_inc, grad);

  stats.penalty = penalty_sum / static_cast<double>(b);
  stats.loss = stats.td_loss + config.penalty_weight * stats.penalty;
  nn::adam_step(agent.critic.params(), grad, agent.critic_opt, lr);
  agent.critic.project();
  return stats;
}

VectorXd actor_gradient(const Agent& agent, const std::vector<const Transition*>& batch, double* loss) {
  const Index b = static_cast<Index>(batch.size());
  const Mat<double> s = stack_columns(batch, &Transition::s);
  nn::Mlp<double>::Cache actor_cache;
  const Mat<double> out = agent.actor.forward(s, &actor_cache);
  nn::Critic<double>::Cache critic_cache;
  const Mat<double> q = agent.critic.forward(s, out, &critic_cache);
  const Mat<double> dq = Mat<double>::Constant(1, b, -1.0 / static_cast<double>(b));
  const Mat<double> da = agent.critic.input_gradient(critic_cache, dq).second;
  VectorXd grad = VectorXd::Zero(agent.actor.num_params());
  agent.actor.backward(actor_cache, da, grad);
  if (loss) *loss = -q.mean();
  return grad;
}

double actor_update(Agent& agent, const std::vector<const Transition*>& batch, double lr) {
  double loss = 0.0;
  const VectorXd grad = actor_gradient(agent, batch, &loss);
  nn::adam_step(agent.actor.params(), grad, agent.actor_opt, lr);
  return loss;
}

void train(Agent& agent, const SchedulingEnv& env, const TrainConfig& config, TrainRngs& rngs,
           const MetricsSink& sink, const StepSink& steps) {
  config.validate();
  if (env.num_devices() != agent.num_devices || env.num_channels() != agent.num_channels)
    throw std::invalid_argument("train: agent and environment dimensions differ");
  using Clock = std::chrono::steady_clock;

  ReplayBuffer buffer(static_cast<std::size_t>(config.replay_capacity));
  const std::size_t warmup = static_cast<std::size_t>(config.warmup_batches) * config.batch;
  const double m = agent.num_channels;
  const double decay_span = config.noise_decay_fraction * config.episodes;
  std::vector<const Transition*> batch(static_cast<std::size_t>(config.batch));

  for (int e = 0; e < config.episodes; ++e) {
    const auto started = Clock::now();
    const double lr_a = config.lr_actor / (1.0 + config.lr_decay * e);
    const double lr_c = config.lr_critic / (1.0 + config.lr_decay * e);
    const double frac = decay_span > 0 ? std::min(1.0, e / decay_span) : 1.0;
    const double sigma = m * (config.noise_start + (config.noise_end - config.noise_start) * frac);

    EpisodeMetrics metrics;
    metrics.episode = e;
    SystemState state = env.reset(rngs.env);
    double cost = 0.0;
    for (int t = 0; t < config.horizon; ++t) {
      Transition tr;
      tr.s = env.encode(state);
      tr.a_raw = select_action(agent, tr.s, sigma, rngs.explore);
      tr.a = project_action(tr.a_raw, agent.num_devices, agent.num_channels);
      StepOutcome out = env.step(state, tr.a, rngs.env);
      if (steps) steps(e, t, state, tr.a, out.reward);
      tr.r = out.reward;
      cost -= out.reward;
      tr.s_next = env.encode(out.next_state);
      tr.raw_state = std::move(state);
      state = out.next_state;
      tr.raw_next_state = std::move(out.next_state);
      buffer.push(std::move(tr));

      if (buffer.size() < warmup) continue;
      const auto picked = buffer.sample(static_cast<std::size_t>(config.batch), rngs.replay);
      for (std::size_t i = 0; i < picked.size(); ++i) batch[i] = &buffer[picked[i]];
      const UpdateStats cs = critic_update(agent, batch, config, lr_c, env, rngs.penalty);
      const double al = actor_update(agent, batch, lr_a);
      nn::soft_update(agent.target_critic.params(), agent.critic.params(), config.delta);
      nn::soft_update(agent.target_actor.params(), agent.actor.params(), config.delta);
      if (!agent.critic.params().allFinite() || !agent.actor.params().allFinite() || !std::isfinite(cs.loss)) {
        std::ostringstream msg;
        msg << "training diverged (non-finite parameters) in episode " << e;
        throw TrainingDivergedError(msg.str(), e);
      }
      metrics.critic_loss += cs.loss;
      metrics.actor_loss += al;
      metrics.penalty += cs.penalty;
      ++metrics.updates;
    }
    metrics.avg_sum_cost = cost / config.horizon;
    if (metrics.updates > 0) {
      metrics.critic_loss /= metrics.updates;
      metrics.actor_loss /= metrics.updates;
      metrics.penalty /= metrics.updates;
    }
    metrics.wall_seconds = std::chrono::duration<double>(Clock::now() - started).count();
    if (sink) sink(metrics);
  }
}

Policy actor_policy(const Agent& agent, const SchedulingEnv& env) {
  return [&agent, &env](const SystemState& s) {
    return project_action(actor_action(agent, env.encode(s)), agent.num_devices, agent.num_channels);
  };
}

}  // namespace monosched
