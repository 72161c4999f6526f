#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "monosched/harness.hpp"

namespace monosched {

namespace {

using Json = nlohmann::ordered_json;

// Strict reader over one JSON object: typed lookups with a dotted field path,
// and an error for any key that was never asked for.
class Fields {
 public:
  Fields(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void get(const std::string& key, int& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(path(key), "expected an integer");
      const auto x = v->get<std::int64_t>();
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
        throw ConfigError(path(key), "integer out of range");
      out = static_cast<int>(x);
    }
  }
  void get(const std::string& key, std::uint64_t& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(path(key), "expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void get(const std::string& key, double& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(path(key), "expected a number");
      out = v->get<double>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (const Json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(path(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const Json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(path(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  template <typename T>
  void get(const std::string& key, std::vector<T>& out) {
    if (const Json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(path(key), "expected an array");
      std::vector<T> items;
      for (std::size_t i = 0; i < v->size(); ++i) {
        const Json& e = (*v)[i];
        const std::string where = path(key) + "[" + std::to_string(i) + "]";
        if constexpr (std::is_same_v<T, int>) {
          if (!e.is_number_integer()) throw ConfigError(where, "expected an integer");
          items.push_back(e.get<int>());
        } else {
          if (!e.is_number()) throw ConfigError(where, "expected a number");
          items.push_back(e.get<double>());
        }
      }
      out = std::move(items);
    }
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError(path(item.key()), "unknown key");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Json matrix_to_json(const MatrixXd& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) throw ConfigError(path, "expected a non-empty array of rows");
  MatrixXd m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Json& row = j[i];
    if (!row.is_array() || row.size() != cols) throw ConfigError(path, "rows must have equal length");
    for (std::size_t k = 0; k < cols; ++k) {
      if (!row[k].is_number()) throw ConfigError(path, "matrix entries must be numbers");
      m(static_cast<Index>(i), static_cast<Index>(k)) = row[k].get<double>();
    }
  }
  return m;
}

Json train_to_json(const TrainConfig& t) {
  Json j;
  j["batch"] = t.batch;
  j["replay_capacity"] = t.replay_capacity;
  j["lr_actor"] = t.lr_actor;
  j["lr_critic"] = t.lr_critic;
  j["lr_decay"] = t.lr_decay;
  j["delta"] = t.delta;
  j["episodes"] = t.episodes;
  j["horizon"] = t.horizon;
  j["penalty_samples"] = t.penalty_samples;
  j["penalty_weight"] = t.penalty_weight;
  j["noise_start"] = t.noise_start;
  j["noise_end"] = t.noise_end;
  j["noise_decay_fraction"] = t.noise_decay_fraction;
  j["td_target_mode"] = to_string(t.td_mode);
  j["warmup_batches"] = t.warmup_batches;
  j["actor_hidden"] = t.actor_hidden;
  j["critic_hidden"] = t.critic_hidden;
  j["monotone_state_hidden"] = t.monotone_state_hidden;
  j["monotone_action_hidden"] = t.monotone_action_hidden;
  j["reward_scale"] = t.reward_scale;
  j["exact_max_limit"] = t.exact_max_limit;
  j["critic_raw_action"] = t.critic_raw_action;
  return j;
}

void train_from_json(const Json& j, const std::string& path, TrainConfig& t) {
  Fields f(j, path);
  f.get("batch", t.batch);
  f.get("replay_capacity", t.replay_capacity);
  f.get("lr_actor", t.lr_actor);
  f.get("lr_critic", t.lr_critic);
  f.get("lr_decay", t.lr_decay);
  f.get("delta", t.delta);
  f.get("episodes", t.episodes);
  f.get("horizon", t.horizon);
  f.get("penalty_samples", t.penalty_samples);
  f.get("penalty_weight", t.penalty_weight);
  f.get("noise_start", t.noise_start);
  f.get("noise_end", t.noise_end);
  f.get("noise_decay_fraction", t.noise_decay_fraction);
  std::string mode = to_string(t.td_mode);
  f.get("td_target_mode", mode);
  try {
    t.td_mode = td_mode_from_string(mode);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(f.path("td_target_mode"), e.what());
  }
  f.get("warmup_batches", t.warmup_batches);
  f.get("actor_hidden", t.actor_hidden);
  f.get("critic_hidden", t.critic_hidden);
  f.get("monotone_state_hidden", t.monotone_state_hidden);
  f.get("monotone_action_hidden", t.monotone_action_hidden);
  f.get("reward_scale", t.reward_scale);
  f.get("exact_max_limit", t.exact_max_limit);
  f.get("critic_raw_action", t.critic_raw_action);
  f.finish();
}

Variant parse_variant(const std::string& name, const std::string& path) {
  try {
    return variant_from_string(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

void check_train(const TrainConfig& t, const std::string& path) {
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    // TrainConfig reports "train.<field>: why".
    const std::string msg = e.what();
    const auto colon = msg.find(':');
    const std::string field = msg.substr(0, colon);
    const std::string leaf = field.rfind("train.", 0) == 0 ? field.substr(6) : field;
    throw ConfigError(path + "." + leaf, colon == std::string::npos ? msg : msg.substr(colon + 2));
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (num_devices < 2) throw ConfigError("num_devices", "must be at least 2");
  if (num_channels < 1) throw ConfigError("num_channels", "must be positive");
  if (num_channels >= num_devices) throw ConfigError("num_channels", "must be smaller than num_devices (M < N)");
  if (levels < 2) throw ConfigError("levels", "must be at least 2");
  if (tau_max < 2) throw ConfigError("tau_max", "must be at least 2");
  if (!(gamma > 0 && gamma < 1)) throw ConfigError("gamma", "must lie in (0, 1)");

  if (process.state_dim < 1) throw ConfigError("process.state_dim", "must be positive");
  if (process.meas_dim < 1) throw ConfigError("process.meas_dim", "must be positive");
  if (!(process.rho_min > 0)) throw ConfigError("process.rho_min", "must be positive");
  if (!(process.rho_max >= process.rho_min)) throw ConfigError("process.rho_max", "must be >= rho_min");
  if (!processes.empty()) {
    if (static_cast<int>(processes.size()) != num_devices)
      throw ConfigError("processes", "need exactly one process per device");
    for (std::size_t i = 0; i < processes.size(); ++i) {
      try {
        processes[i].validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError("processes[" + std::to_string(i) + "]", e.what());
      }
    }
  }

  if (channel.quantization != "equal_quantile" && channel.quantization != "thresholds")
    throw ConfigError("channel.quantization", "expected equal_quantile or thresholds");
  if (!(channel.rayleigh_scale > 0)) throw ConfigError("channel.rayleigh_scale", "must be positive");
  if (channel.quantization == "thresholds") {
    if (static_cast<int>(channel.thresholds.size()) != levels - 1)
      throw ConfigError("channel.thresholds", "need levels - 1 cut-points");
    for (std::size_t i = 0; i < channel.thresholds.size(); ++i)
      if (!(channel.thresholds[i] > 0) || (i > 0 && !(channel.thresholds[i] > channel.thresholds[i - 1])))
        throw ConfigError("channel.thresholds", "cut-points must be positive and strictly ascending");
  }
  if (channel.drop_probs.empty()) {
    if (levels != default_drop_probs().size())
      throw ConfigError("channel.drop_probs", "the default table has 5 levels; give one entry per level");
  } else {
    if (static_cast<int>(channel.drop_probs.size()) != levels)
      throw ConfigError("channel.drop_probs", "need one entry per level");
    for (std::size_t i = 0; i < channel.drop_probs.size(); ++i) {
      const double p = channel.drop_probs[i];
      if (!(p >= 0 && p <= 1)) throw ConfigError("channel.drop_probs", "entries must lie in [0, 1]");
      if (i > 0 && p < channel.drop_probs[i - 1])
        throw ConfigError("channel.drop_probs", "must be non-decreasing in the level");
    }
  }

  if (variants.empty()) throw ConfigError("variants", "need at least one variant");
  for (std::size_t i = 0; i < variants.size(); ++i)
    for (std::size_t k = 0; k < i; ++k)
      if (variants[i] == variants[k]) throw ConfigError("variants", "duplicate variant " + to_string(variants[i]));
  check_train(train_config(Variant::kBaseline), "train");
  for (const auto& [v, t] : variant_train) check_train(t, "variant_train." + to_string(v));

  if (evaluation.episodes < 1) throw ConfigError("evaluation.episodes", "must be positive");
  if (evaluation.horizon < 1) throw ConfigError("evaluation.horizon", "must be positive");
}

TrainConfig ExperimentConfig::train_config(Variant v) const {
  TrainConfig t = train;
  for (const auto& [variant, override_config] : variant_train)
    if (variant == v) t = override_config;
  t.gamma = gamma;
  t.variant = v;
  return t;
}

std::string to_json(const ExperimentConfig& c) {
  Json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["num_devices"] = c.num_devices;
  j["num_channels"] = c.num_channels;
  j["levels"] = c.levels;
  j["tau_max"] = c.tau_max;
  j["gamma"] = c.gamma;
  j["process"] = {{"state_dim", c.process.state_dim},
                  {"meas_dim", c.process.meas_dim},
                  {"rho_min", c.process.rho_min},
                  {"rho_max", c.process.rho_max}};
  if (!c.processes.empty()) {
    Json list = Json::array();
    for (const LtiProcess& p : c.processes)
      list.push_back(
          {{"A", matrix_to_json(p.A)}, {"C", matrix_to_json(p.C)}, {"W", matrix_to_json(p.W)}, {"V", matrix_to_json(p.V)}});
    j["processes"] = std::move(list);
  }
  j["channel"] = {{"quantization", c.channel.quantization},
                  {"rayleigh_scale", c.channel.rayleigh_scale},
                  {"thresholds", c.channel.thresholds},
                  {"drop_probs", c.channel.drop_probs}};
  Json variants = Json::array();
  for (Variant v : c.variants) variants.push_back(to_string(v));
  j["variants"] = std::move(variants);
  j["train"] = train_to_json(c.train);
  Json overrides = Json::object();
  for (const auto& [v, t] : c.variant_train) overrides[to_string(v)] = train_to_json(t);
  j["variant_train"] = std::move(overrides);
  j["evaluation"] = {{"episodes", c.evaluation.episodes},
                     {"horizon", c.evaluation.horizon},
                     {"baselines", c.evaluation.baselines}};
  j["dump_trajectories"] = c.dump_trajectories;
  return j.dump(2) + "\n";
}

ExperimentConfig parse_config(const std::string& json_text) {
  Json j;
  try {
    j = Json::parse(json_text, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::parse_error& e) {
    throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
  }
  ExperimentConfig c;
  Fields f(j, "");
  f.get("name", c.name);
  f.get("seed", c.seed);
  f.get("num_devices", c.num_devices);
  f.get("num_channels", c.num_channels);
  f.get("levels", c.levels);
  f.get("tau_max", c.tau_max);
  f.get("gamma", c.gamma);
  if (const Json* p = f.find("process")) {
    Fields g(*p, "process");
    g.get("state_dim", c.process.state_dim);
    g.get("meas_dim", c.process.meas_dim);
    g.get("rho_min", c.process.rho_min);
    g.get("rho_max", c.process.rho_max);
    g.finish();
  }
  if (const Json* p = f.find("processes")) {
    if (!p->is_array()) throw ConfigError("processes", "expected an array");
    for (std::size_t i = 0; i < p->size(); ++i) {
      const std::string where = "processes[" + std::to_string(i) + "]";
      Fields g((*p)[i], where);
      LtiProcess proc;
      for (auto [key, target] : {std::pair{"A", &proc.A}, {"C", &proc.C}, {"W", &proc.W}, {"V", &proc.V}}) {
        const Json* m = g.find(key);
        if (!m) throw ConfigError(where + "." + key, "missing matrix");
        *target = matrix_from_json(*m, where + "." + key);
      }
      g.finish();
      c.processes.push_back(std::move(proc));
    }
  }
  if (const Json* p = f.find("channel")) {
    Fields g(*p, "channel");
    g.get("quantization", c.channel.quantization);
    g.get("rayleigh_scale", c.channel.rayleigh_scale);
    g.get("thresholds", c.channel.thresholds);
    g.get("drop_probs", c.channel.drop_probs);
    g.finish();
  }
  if (const Json* p = f.find("variants")) {
    if (!p->is_array()) throw ConfigError("variants", "expected an array of names");
    c.variants.clear();
    for (std::size_t i = 0; i < p->size(); ++i) {
      const std::string where = "variants[" + std::to_string(i) + "]";
      if (!(*p)[i].is_string()) throw ConfigError(where, "expected a string");
      c.variants.push_back(parse_variant((*p)[i].get<std::string>(), where));
    }
  }
  if (const Json* p = f.find("train")) train_from_json(*p, "train", c.train);
  if (const Json* p = f.find("variant_train")) {
    if (!p->is_object()) throw ConfigError("variant_train", "expected an object keyed by variant");
    for (const auto& item : p->items()) {
      const std::string where = "variant_train." + item.key();
      const Variant v = parse_variant(item.key(), where);
      TrainConfig t = c.train;
      train_from_json(item.value(), where, t);
      c.variant_train.emplace_back(v, std::move(t));
    }
  }
  if (const Json* p = f.find("evaluation")) {
    Fields g(*p, "evaluation");
    g.get("episodes", c.evaluation.episodes);
    g.get("horizon", c.evaluation.horizon);
    g.get("baselines", c.evaluation.baselines);
    g.finish();
  }
  f.get("dump_trajectories", c.dump_trajectories);
  f.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) { return to_json(a) == to_json(b); }

std::vector<std::string> preset_names() { return {"tiny", "small", "medium"}; }

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  if (name == "tiny") {
    c.num_devices = 2;
    c.num_channels = 1;
    c.levels = 2;
    c.tau_max = 6;
    c.channel.drop_probs = {0.1, 0.5};
    c.train.episodes = 300;
    c.train.horizon = 100;
    c.train.batch = 64;
    c.train.actor_hidden = {64, 64};
    c.train.critic_hidden = {64, 64};
    c.train.monotone_state_hidden = 64;
    c.train.monotone_action_hidden = 32;
    c.train.lr_actor = 1e-3;
    c.train.lr_critic = 1e-3;
    c.train.delta = 0.01;
    c.train.td_mode = TdTargetMode::kExactMax;
    c.train.reward_scale = 0.02;
    c.evaluation = {200, 200, true};
  } else if (name == "small") {
    c.num_devices = 6;
    c.num_channels = 3;
    c.levels = 5;
    c.tau_max = 30;
    c.train.episodes = 300;
    c.train.horizon = 100;
    c.train.batch = 64;
    c.train.actor_hidden = {64, 64};
    c.train.critic_hidden = {64};  // shallow critic
    c.train.monotone_state_hidden = 64;
    c.train.monotone_action_hidden = 32;
    c.train.lr_actor = 1e-4;
    c.train.lr_critic = 3e-4;
    c.train.delta = 0.005;
    c.train.reward_scale = 1e-3;
    c.evaluation = {50, 200, true};
  } else if (name == "medium") {
    c.num_devices = 14;
    c.num_channels = 7;
    c.levels = 5;
    c.tau_max = 30;
    c.train.episodes = 150;
    c.train.horizon = 100;
    c.train.batch = 64;
    c.train.actor_hidden = {128, 128};
    c.train.critic_hidden = {128, 128, 64};  // deep critic
    c.train.monotone_state_hidden = 128;
    c.train.monotone_action_hidden = 64;
    c.train.lr_actor = 1e-4;
    c.train.lr_critic = 3e-4;
    c.train.delta = 0.005;
    c.train.reward_scale = 1e-3;
    c.evaluation = {50, 200, true};
  } else {
    throw ConfigError("preset", "unknown preset '" + name + "' (expected tiny, small or medium)");
  }
  c.validate();
  return c;
}

}  // namespace monosched
