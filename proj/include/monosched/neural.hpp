#pragma once

// Fully connected networks with hand-written forward and reverse passes.
//
// Mini-batches are column-major: an input batch is (input_dim x batch), one
// sample per column. Parameters live in one flat vector per network so that
// optimizers, target-network updates and checkpoints treat every network alike.
// Within the flat vector each layer stores its weight matrix row-major
// (out x in), followed by its bias when present.
//
// backward() computes exact gradients of sum_{i,k} dY(k, i) * Y(k, i); callers
// that want a per-sample mean pass dY already divided by the batch size.

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "monosched/common.hpp"

namespace monosched::nn {

enum class Activation { kIdentity, kRelu, kSigmoid, kTanh };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kTanh: return "tanh";
  }
  return "identity";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::kIdentity;
  if (s == "relu") return Activation::kRelu;
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "tanh") return Activation::kTanh;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Derived>
auto activate(Activation a, const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  Mat<Scalar> out(z.rows(), z.cols());
  switch (a) {
    case Activation::kIdentity: out = z; break;
    case Activation::kRelu: out = z.cwiseMax(Scalar(0)); break;
    case Activation::kSigmoid: out = (Scalar(1) + (-z.array()).exp()).inverse().matrix(); break;
    case Activation::kTanh: out = z.array().tanh().matrix(); break;
  }
  return out;
}

/// First derivative of the activation at the pre-activation z.
template <typename Derived>
auto activate_d1(Activation a, const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  Mat<Scalar> out(z.rows(), z.cols());
  switch (a) {
    case Activation::kIdentity: out.setOnes(); break;
    case Activation::kRelu: out = (z.array() > Scalar(0)).template cast<Scalar>().matrix(); break;
    case Activation::kSigmoid: {
      const auto s = (Scalar(1) + (-z.array()).exp()).inverse();
      out = (s * (Scalar(1) - s)).matrix();
      break;
    }
    case Activation::kTanh: {
      const auto t = z.array().tanh();
      out = (Scalar(1) - t * t).matrix();
      break;
    }
  }
  return out;
}

/// Second derivative of the activation at z (zero for identity and ReLU).
template <typename Derived>
auto activate_d2(Activation a, const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  Mat<Scalar> out(z.rows(), z.cols());
  switch (a) {
    case Activation::kIdentity:
    case Activation::kRelu: out.setZero(); break;
    case Activation::kSigmoid: {
      const auto s = (Scalar(1) + (-z.array()).exp()).inverse();
      out = (s * (Scalar(1) - s) * (Scalar(1) - Scalar(2) * s)).matrix();
      break;
    }
    case Activation::kTanh: {
      const auto t = z.array().tanh();
      out = (Scalar(-2) * t * (Scalar(1) - t * t)).matrix();
      break;
    }
  }
  return out;
}

/// Shape of a fully connected network and the arithmetic over a flat parameter
/// block that starts `offset` entries into a larger parameter vector.
template <typename Scalar>
class MlpLayout {
 public:
  struct Cache {
    std::vector<Mat<Scalar>> x;  // x[l] is the input of layer l; x.back() is the output
    std::vector<Mat<Scalar>> z;  // pre-activations
  };

  MlpLayout() = default;
  MlpLayout(std::vector<int> dims, std::vector<Activation> acts, bool output_bias = true, Index offset = 0)
      : dims_(std::move(dims)), acts_(std::move(acts)), output_bias_(output_bias), offset_(offset) {
    if (dims_.size() < 2) throw std::invalid_argument("MlpLayout: need at least input and output dims");
    if (acts_.size() + 1 != dims_.size()) throw std::invalid_argument("MlpLayout: one activation per layer");
    for (int d : dims_)
      if (d < 1) throw std::invalid_argument("MlpLayout: layer widths must be positive");
    Index at = offset_;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      w_off_.push_back(at);
      at += static_cast<Index>(dims_[l + 1]) * dims_[l];
      b_off_.push_back(at);
      if (has_bias(l)) at += dims_[l + 1];
    }
    end_ = at;
  }

  int num_layers() const { return static_cast<int>(acts_.size()); }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  Index offset() const { return offset_; }
  Index num_params() const { return end_ - offset_; }
  Index end() const { return end_; }
  const std::vector<int>& dims() const { return dims_; }
  const std::vector<Activation>& activations() const { return acts_; }
  bool output_bias() const { return output_bias_; }
  bool has_bias(std::size_t l) const { return l + 1 < acts_.size() || output_bias_; }
  Index weight_offset(std::size_t l) const { return w_off_[l]; }
  Index bias_offset(std::size_t l) const { return b_off_[l]; }

  Eigen::Map<const RowMat<Scalar>> weight(const Scalar* p, std::size_t l) const {
    return {p + w_off_[l], dims_[l + 1], dims_[l]};
  }
  Eigen::Map<RowMat<Scalar>> weight(Scalar* p, std::size_t l) const { return {p + w_off_[l], dims_[l + 1], dims_[l]}; }
  Eigen::Map<const Vec<Scalar>> bias(const Scalar* p, std::size_t l) const { return {p + b_off_[l], dims_[l + 1]}; }
  Eigen::Map<Vec<Scalar>> bias(Scalar* p, std::size_t l) const { return {p + b_off_[l], dims_[l + 1]}; }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void initialize(Scalar* p, Rng& rng) const {
    for (std::size_t l = 0; l < acts_.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(dims_[l]));
      auto w = weight(p, l);
      for (Index i = 0; i < w.rows(); ++i)
        for (Index j = 0; j < w.cols(); ++j) w(i, j) = Scalar(bound * (2.0 * uniform01(rng) - 1.0));
      if (has_bias(l)) {
        auto b = bias(p, l);
        for (Index i = 0; i < b.size(); ++i) b(i) = Scalar(bound * (2.0 * uniform01(rng) - 1.0));
      }
    }
  }

  Mat<Scalar> forward(const Scalar* p, const Mat<Scalar>& x, Cache* cache = nullptr) const {
    if (x.rows() != input_dim()) throw std::invalid_argument("MlpLayout::forward: input dimension mismatch");
    Mat<Scalar> a = x;
    if (cache) {
      cache->x.assign(1, x);
      cache->z.clear();
    }
    for (std::size_t l = 0; l < acts_.size(); ++l) {
      Mat<Scalar> z = weight(p, l) * a;
      if (has_bias(l)) z.colwise() += bias(p, l);
      a = activate(acts_[l], z);
      if (cache) {
        cache->z.push_back(std::move(z));
        cache->x.push_back(a);
      }
    }
    return a;
  }

  /// Accumulates parameter gradients into grad (same indexing as p; skipped when
  /// grad is null) and returns dL/dX.
  Mat<Scalar> backward(const Scalar* p, const Cache& cache, const Mat<Scalar>& dy, Scalar* grad) const {
    Mat<Scalar> da = dy;
    for (std::size_t l = acts_.size(); l-- > 0;) {
      const Mat<Scalar> dz = (activate_d1(acts_[l], cache.z[l]).array() * da.array()).matrix();
      if (grad) {
        weight(grad, l).noalias() += dz * cache.x[l].transpose();
        if (has_bias(l)) bias(grad, l) += dz.rowwise().sum();
      }
      da.noalias() = weight(p, l).transpose() * dz;
    }
    return da;
  }

  /// Forward-mode directional derivatives: column c of the result is
  /// d output(x_{cols[c]}) along direction t0.col(c).
  Mat<Scalar> jvp(const Scalar* p, const Cache& cache, const std::vector<Index>& cols, const Mat<Scalar>& t0) const {
    Mat<Scalar> t = t0;
    for (std::size_t l = 0; l < acts_.size(); ++l) {
      const Mat<Scalar> zt = weight(p, l) * t;
      t = (activate_d1(acts_[l], gather(cache.z[l], cols)).array() * zt.array()).matrix();
    }
    return t;
  }

  /// Parameter gradient of sum_c <dydot.col(c), jvp(...).col(c)>, accumulated into grad.
  /// This differentiates input-derivatives with respect to the parameters
  /// (reverse sweep over the primal-plus-tangent graph).
  void tangent_backward(const Scalar* p, const Cache& cache, const std::vector<Index>& cols, const Mat<Scalar>& t0,
                        const Mat<Scalar>& dydot, Scalar* grad) const {
    const std::size_t layers = acts_.size();
    std::vector<Mat<Scalar>> xt(layers + 1), zt(layers), zc(layers), xc(layers);
    xt[0] = t0;
    for (std::size_t l = 0; l < layers; ++l) {
      zc[l] = gather(cache.z[l], cols);
      xc[l] = gather(cache.x[l], cols);
      zt[l] = weight(p, l) * xt[l];
      xt[l + 1] = (activate_d1(acts_[l], zc[l]).array() * zt[l].array()).matrix();
    }
    Mat<Scalar> bar_xt = dydot;
    Mat<Scalar> bar_x = Mat<Scalar>::Zero(dydot.rows(), dydot.cols());
    for (std::size_t l = layers; l-- > 0;) {
      const Mat<Scalar> d1 = activate_d1(acts_[l], zc[l]);
      const Mat<Scalar> d2 = activate_d2(acts_[l], zc[l]);
      const Mat<Scalar> bar_zt = (d1.array() * bar_xt.array()).matrix();
      const Mat<Scalar> bar_z = (d2.array() * zt[l].array() * bar_xt.array() + d1.array() * bar_x.array()).matrix();
      weight(grad, l).noalias() += bar_zt * xt[l].transpose() + bar_z * xc[l].transpose();
      if (has_bias(l)) bias(grad, l) += bar_z.rowwise().sum();
      bar_xt = weight(p, l).transpose() * bar_zt;
      bar_x = weight(p, l).transpose() * bar_z;
    }
  }

 private:
  static Mat<Scalar> gather(const Mat<Scalar>& m, const std::vector<Index>& cols) {
    Mat<Scalar> out(m.rows(), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Index>(c)) = m.col(cols[c]);
    return out;
  }

  std::vector<int> dims_;
  std::vector<Activation> acts_;
  bool output_bias_ = true;
  Index offset_ = 0;
  Index end_ = 0;
  std::vector<Index> w_off_;
  std::vector<Index> b_off_;
};

/// A plain multilayer perceptron owning its parameters.
template <typename Scalar>
class Mlp {
 public:
  using Cache = typename MlpLayout<Scalar>::Cache;

  Mlp() = default;
  Mlp(std::vector<int> dims, std::vector<Activation> acts, bool output_bias = true)
      : layout_(std::move(dims), std::move(acts), output_bias), params_(Vec<Scalar>::Zero(layout_.num_params())) {}

  /// Hidden layers share one activation; the output layer gets its own.
  static Mlp make(int input, const std::vector<int>& hidden, int output, Activation hidden_act, Activation output_act) {
    std::vector<int> dims{input};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(output);
    std::vector<Activation> acts(hidden.size(), hidden_act);
    acts.push_back(output_act);
    return Mlp(std::move(dims), std::move(acts));
  }

  void initialize(Rng& rng) { layout_.initialize(params_.data(), rng); }

  const MlpLayout<Scalar>& layout() const { return layout_; }
  int input_dim() const { return layout_.input_dim(); }
  int output_dim() const { return layout_.output_dim(); }
  Index num_params() const { return layout_.num_params(); }
  Vec<Scalar>& params() { return params_; }
  const Vec<Scalar>& params() const { return params_; }

  Mat<Scalar> forward(const Mat<Scalar>& x, Cache* cache = nullptr) const {
    return layout_.forward(params_.data(), x, cache);
  }
  Mat<Scalar> backward(const Cache& cache, const Mat<Scalar>& dy, Vec<Scalar>& grad) const {
    check_grad(grad);
    return layout_.backward(params_.data(), cache, dy, grad.data());
  }
  /// dL/dX only; no parameter gradients.
  Mat<Scalar> input_gradient(const Cache& cache, const Mat<Scalar>& dy) const {
    return layout_.backward(params_.data(), cache, dy, nullptr);
  }
  Mat<Scalar> jvp(const Cache& cache, const std::vector<Index>& cols, const Mat<Scalar>& t0) const {
    return layout_.jvp(params_.data(), cache, cols, t0);
  }
  void tangent_backward(const Cache& cache, const std::vector<Index>& cols, const Mat<Scalar>& t0,
                        const Mat<Scalar>& dydot, Vec<Scalar>& grad) const {
    check_grad(grad);
    layout_.tangent_backward(params_.data(), cache, cols, t0, dydot, grad.data());
  }

  auto weight(std::size_t l) { return layout_.weight(params_.data(), l); }
  auto weight(std::size_t l) const { return layout_.weight(params_.data(), l); }
  auto bias(std::size_t l) { return layout_.bias(params_.data(), l); }
  auto bias(std::size_t l) const { return layout_.bias(params_.data(), l); }

 private:
  void check_grad(const Vec<Scalar>& grad) const {
    if (grad.size() != params_.size()) throw std::invalid_argument("Mlp: gradient buffer has wrong size");
  }

  MlpLayout<Scalar> layout_;
  Vec<Scalar> params_;
};

/// Critic whose output is non-increasing in every state input.
///
///   Q(s, a) = w_s' sigmoid(W_s s + b_s) + w_a' relu(W_a a + b_a) + c
///
/// with W_s >= 0 and w_s <= 0 enforced by project(). The action path is
/// unconstrained and the two paths share the single output bias c.
template <typename Scalar>
class MonotoneCritic {
 public:
  struct Cache {
    typename MlpLayout<Scalar>::Cache state;
    typename MlpLayout<Scalar>::Cache action;
  };

  MonotoneCritic() = default;
  MonotoneCritic(int state_dim, int state_hidden, int action_dim, int action_hidden)
      : state_path_({state_dim, state_hidden, 1}, {Activation::kSigmoid, Activation::kIdentity}, false, 0),
        action_path_({action_dim, action_hidden, 1}, {Activation::kRelu, Activation::kIdentity}, false,
                     state_path_.end()),
        bias_offset_(action_path_.end()),
        params_(Vec<Scalar>::Zero(bias_offset_ + 1)) {}

  /// Uniform fan-in initialization followed by one projection.
  void initialize(Rng& rng) {
    state_path_.initialize(params_.data(), rng);
    action_path_.initialize(params_.data(), rng);
    params_(bias_offset_) = Scalar(0);
    project();
  }

  int state_dim() const { return state_path_.input_dim(); }
  int action_dim() const { return action_path_.input_dim(); }
  int state_hidden() const { return state_path_.dims()[1]; }
  int action_hidden() const { return action_path_.dims()[1]; }
  Index num_params() const { return params_.size(); }
  Vec<Scalar>& params() { return params_; }
  const Vec<Scalar>& params() const { return params_; }
  const MlpLayout<Scalar>& state_path() const { return state_path_; }
  const MlpLayout<Scalar>& action_path() const { return action_path_; }

  /// Input-to-hidden weights of the state path (constrained >= 0).
  auto state_in_weights() { return state_path_.weight(params_.data(), 0); }
  auto state_in_weights() const { return state_path_.weight(params_.data(), 0); }
  /// Hidden-to-output weights of the state path (constrained <= 0).
  auto state_out_weights() { return state_path_.weight(params_.data(), 1); }
  auto state_out_weights() const { return state_path_.weight(params_.data(), 1); }
  Scalar& output_bias() { return params_(bias_offset_); }
  Scalar output_bias() const { return params_(bias_offset_); }

  /// Clamps W_s to >= 0 and w_s to <= 0; leaves everything else untouched.
  void project() {
    auto w_in = state_in_weights();
    w_in = w_in.cwiseMax(Scalar(0));
    auto w_out = state_out_weights();
    w_out = w_out.cwiseMin(Scalar(0));
  }

  bool satisfies_constraints() const {
    return (state_in_weights().array() >= Scalar(0)).all() && (state_out_weights().array() <= Scalar(0)).all();
  }

  /// Q for each column pair; returns a 1 x B row.
  Mat<Scalar> forward(const Mat<Scalar>& s, const Mat<Scalar>& a, Cache* cache = nullptr) const {
    Mat<Scalar> q = state_path_.forward(params_.data(), s, cache ? &cache->state : nullptr);
    q += action_path_.forward(params_.data(), a, cache ? &cache->action : nullptr);
    q.array() += params_(bias_offset_);
    return q;
  }

  /// Output of the state path alone (no action path, no bias).
  Mat<Scalar> state_value(const Mat<Scalar>& s) const { return state_path_.forward(params_.data(), s); }

  /// Returns (dL/dS, dL/dA) and accumulates parameter gradients.
  std::pair<Mat<Scalar>, Mat<Scalar>> backward(const Cache& cache, const Mat<Scalar>& dq, Vec<Scalar>& grad) const {
    if (grad.size() != params_.size()) throw std::invalid_argument("MonotoneCritic: gradient buffer has wrong size");
    Mat<Scalar> ds = state_path_.backward(params_.data(), cache.state, dq, grad.data());
    Mat<Scalar> da = action_path_.backward(params_.data(), cache.action, dq, grad.data());
    grad(bias_offset_) += dq.sum();
    return {std::move(ds), std::move(da)};
  }

  std::pair<Mat<Scalar>, Mat<Scalar>> input_gradient(const Cache& cache, const Mat<Scalar>& dq) const {
    return {state_path_.backward(params_.data(), cache.state, dq, nullptr),
            action_path_.backward(params_.data(), cache.action, dq, nullptr)};
  }

  void state_tangent_backward(const Cache& cache, const std::vector<Index>& cols, const Mat<Scalar>& t0,
                              const Mat<Scalar>& dydot, Vec<Scalar>& grad) const {
    state_path_.tangent_backward(params_.data(), cache.state, cols, t0, dydot, grad.data());
  }

 private:
  MlpLayout<Scalar> state_path_;
  MlpLayout<Scalar> action_path_;
  Index bias_offset_ = 0;
  Vec<Scalar> params_;
};

/// Clamps a MonotoneCritic's state-path weights in place.
template <typename Scalar>
void monotone_project(MonotoneCritic<Scalar>& critic) {
  critic.project();
}

/// Q(s, a) network: either a plain MLP over the stacked input [s; a] or a MonotoneCritic.
template <typename Scalar>
class Critic {
 public:
  struct Cache {
    std::variant<typename Mlp<Scalar>::Cache, typename MonotoneCritic<Scalar>::Cache> inner;
  };

  Critic() = default;
  Critic(Mlp<Scalar> net, int state_dim) : net_(std::move(net)), state_dim_(state_dim) {
    const auto& mlp = std::get<Mlp<Scalar>>(net_);
    if (mlp.output_dim() != 1 || mlp.input_dim() <= state_dim)
      throw std::invalid_argument("Critic: MLP must map state+action inputs to one output");
  }
  explicit Critic(MonotoneCritic<Scalar> net) : net_(std::move(net)), state_dim_(std::get<1>(net_).state_dim()) {}

  bool is_monotone() const { return std::holds_alternative<MonotoneCritic<Scalar>>(net_); }
  const MonotoneCritic<Scalar>& monotone() const { return std::get<MonotoneCritic<Scalar>>(net_); }
  MonotoneCritic<Scalar>& monotone() { return std::get<MonotoneCritic<Scalar>>(net_); }
  const Mlp<Scalar>& mlp() const { return std::get<Mlp<Scalar>>(net_); }
  Mlp<Scalar>& mlp() { return std::get<Mlp<Scalar>>(net_); }

  int state_dim() const { return state_dim_; }
  int action_dim() const {
    return is_monotone() ? monotone().action_dim() : mlp().input_dim() - state_dim_;
  }
  Index num_params() const { return params().size(); }
  Vec<Scalar>& params() {
    return std::visit([](auto& n) -> Vec<Scalar>& { return n.params(); }, net_);
  }
  const Vec<Scalar>& params() const {
    return std::visit([](const auto& n) -> const Vec<Scalar>& { return n.params(); }, net_);
  }

  void initialize(Rng& rng) {
    std::visit([&](auto& n) { n.initialize(rng); }, net_);
  }

  /// Applies the sign projection for monotone critics; no-op otherwise.
  void project() {
    if (is_monotone()) monotone().project();
  }

  Mat<Scalar> forward(const Mat<Scalar>& s, const Mat<Scalar>& a, Cache* cache = nullptr) const {
    if (s.rows() != state_dim_ || a.rows() != action_dim() || s.cols() != a.cols())
      throw std::invalid_argument("Critic::forward: input dimension mismatch");
    if (is_monotone()) {
      if (cache) cache->inner.template emplace<1>();
      return monotone().forward(s, a, cache ? &std::get<1>(cache->inner) : nullptr);
    }
    Mat<Scalar> x(s.rows() + a.rows(), s.cols());
    x.topRows(s.rows()) = s;
    x.bottomRows(a.rows()) = a;
    if (cache) cache->inner.template emplace<0>();
    return mlp().forward(x, cache ? &std::get<0>(cache->inner) : nullptr);
  }

  /// Returns (dL/dS, dL/dA); accumulates parameter gradients into grad.
  std::pair<Mat<Scalar>, Mat<Scalar>> backward(const Cache& cache, const Mat<Scalar>& dq, Vec<Scalar>& grad) const {
    if (is_monotone()) return monotone().backward(std::get<1>(cache.inner), dq, grad);
    Mat<Scalar> dx = mlp().backward(std::get<0>(cache.inner), dq, grad);
    return {dx.topRows(state_dim_), dx.bottomRows(dx.rows() - state_dim_)};
  }

  /// (dL/dS, dL/dA) without touching parameter gradients.
  std::pair<Mat<Scalar>, Mat<Scalar>> input_gradient(const Cache& cache, const Mat<Scalar>& dq) const {
    if (is_monotone()) return monotone().input_gradient(std::get<1>(cache.inner), dq);
    Mat<Scalar> dx = mlp().input_gradient(std::get<0>(cache.inner), dq);
    return {dx.topRows(state_dim_), dx.bottomRows(dx.rows() - state_dim_)};
  }

  /// Parameter gradient of sum_c dqdot(c) * dQ/ds_{index[c]} at sample cols[c].
  void state_derivative_backward(const Cache& cache, const std::vector<Index>& cols,
                                 const std::vector<Index>& state_index, const Mat<Scalar>& dqdot,
                                 Vec<Scalar>& grad) const {
    const Index count = static_cast<Index>(cols.size());
    if (is_monotone()) {
      Mat<Scalar> t0 = Mat<Scalar>::Zero(state_dim_, count);
      for (Index c = 0; c < count; ++c) t0(state_index[c], c) = Scalar(1);
      monotone().state_tangent_backward(std::get<1>(cache.inner), cols, t0, dqdot, grad);
      return;
    }
    Mat<Scalar> t0 = Mat<Scalar>::Zero(mlp().input_dim(), count);
    for (Index c = 0; c < count; ++c) t0(state_index[c], c) = Scalar(1);
    mlp().tangent_backward(std::get<0>(cache.inner), cols, t0, dqdot, grad);
  }

 private:
  std::variant<Mlp<Scalar>, MonotoneCritic<Scalar>> net_;
  int state_dim_ = 0;
};

/// Adam moments for one flat parameter vector.
template <typename Scalar>
struct AdamState {
  Vec<Scalar> m;
  Vec<Scalar> v;
  long step = 0;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);

  AdamState() = default;
  explicit AdamState(Index n) : m(Vec<Scalar>::Zero(n)), v(Vec<Scalar>::Zero(n)) {}
};

/// One bias-corrected Adam update.
template <typename Scalar>
void adam_step(Vec<Scalar>& params, const Vec<Scalar>& grad, AdamState<Scalar>& state, Scalar lr) {
  if (grad.size() != params.size() || state.m.size() != params.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  ++state.step;
  state.m = state.beta1 * state.m + (Scalar(1) - state.beta1) * grad;
  state.v = state.beta2 * state.v + (Scalar(1) - state.beta2) * grad.cwiseProduct(grad);
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, Scalar(state.step));
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, Scalar(state.step));
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
}

/// target <- delta * online + (1 - delta) * target.
template <typename Scalar>
void soft_update(Vec<Scalar>& target, const Vec<Scalar>& online, Scalar delta) {
  if (!(delta > Scalar(0) && delta <= Scalar(1))) throw std::invalid_argument("soft_update: delta must lie in (0, 1]");
  if (target.size() != online.size()) throw std::invalid_argument("soft_update: shape mismatch");
  target = delta * online + (Scalar(1) - delta) * target;
}

// Checkpoint text format, one network per block:
//
//   mlp <num_layers> <output_bias 0|1>
//   dims <d0> ... <dL>
//   acts <act1> ... <actL>
//   params <count>
//   <value> ...                      (max_digits10, whitespace separated)
//
//   monotone_critic <state_dim> <state_hidden> <action_dim> <action_hidden>
//   params <count>
//   <value> ...
//
// A Critic block is prefixed by "critic mlp <state_dim>" or "critic monotone".

namespace detail {

template <typename Scalar>
void write_params(std::ostream& out, const Vec<Scalar>& p) {
  out << "params " << p.size() << '\n';
  const auto old = out.precision(std::numeric_limits<Scalar>::max_digits10);
  for (Index i = 0; i < p.size(); ++i) out << p(i) << (i + 1 == p.size() || (i + 1) % 8 == 0 ? '\n' : ' ');
  out.precision(old);
}

template <typename Scalar>
void read_params(std::istream& in, Vec<Scalar>& p) {
  std::string tag;
  Index count = 0;
  if (!(in >> tag >> count) || tag != "params" || count != p.size())
    throw std::runtime_error("checkpoint: parameter block does not match the network shape");
  for (Index i = 0; i < count; ++i)
    if (!(in >> p(i))) throw std::runtime_error("checkpoint: truncated parameter block");
}

inline void expect(std::istream& in, const std::string& word) {
  std::string tag;
  if (!(in >> tag) || tag != word) throw std::runtime_error("checkpoint: expected '" + word + "', got '" + tag + "'");
}

}  // namespace detail

template <typename Scalar>
void write_network(std::ostream& out, const Mlp<Scalar>& net) {
  const auto& layout = net.layout();
  out << "mlp " << layout.num_layers() << ' ' << (layout.output_bias() ? 1 : 0) << "\ndims";
  for (int d : layout.dims()) out << ' ' << d;
  out << "\nacts";
  for (Activation a : layout.activations()) out << ' ' << to_string(a);
  out << '\n';
  detail::write_params(out, net.params());
}

template <typename Scalar>
Mlp<Scalar> read_mlp(std::istream& in) {
  detail::expect(in, "mlp");
  int layers = 0, has_bias = 1;
  in >> layers >> has_bias;
  if (layers < 1) throw std::runtime_error("checkpoint: bad layer count");
  detail::expect(in, "dims");
  std::vector<int> dims(layers + 1);
  for (int& d : dims) in >> d;
  detail::expect(in, "acts");
  std::vector<Activation> acts;
  for (int l = 0; l < layers; ++l) {
    std::string name;
    in >> name;
    acts.push_back(activation_from_string(name));
  }
  if (!in) throw std::runtime_error("checkpoint: malformed MLP header");
  Mlp<Scalar> net(std::move(dims), std::move(acts), has_bias != 0);
  detail::read_params(in, net.params());
  return net;
}

template <typename Scalar>
void write_network(std::ostream& out, const MonotoneCritic<Scalar>& net) {
  out << "monotone_critic " << net.state_dim() << ' ' << net.state_hidden() << ' ' << net.action_dim() << ' '
      << net.action_hidden() << '\n';
  detail::write_params(out, net.params());
}

template <typename Scalar>
MonotoneCritic<Scalar> read_monotone_critic(std::istream& in) {
  detail::expect(in, "monotone_critic");
  int ds = 0, us = 0, da = 0, ua = 0;
  if (!(in >> ds >> us >> da >> ua)) throw std::runtime_error("checkpoint: malformed monotone critic header");
  MonotoneCritic<Scalar> net(ds, us, da, ua);
  detail::read_params(in, net.params());
  return net;
}

template <typename Scalar>
void write_network(std::ostream& out, const Critic<Scalar>& critic) {
  if (critic.is_monotone()) {
    out << "critic monotone\n";
    write_network(out, critic.monotone());
  } else {
    out << "critic mlp " << critic.state_dim() << '\n';
    write_network(out, critic.mlp());
  }
}

template <typename Scalar>
Critic<Scalar> read_critic(std::istream& in) {
  detail::expect(in, "critic");
  std::string kind;
  in >> kind;
  if (kind == "monotone") return Critic<Scalar>(read_monotone_critic<Scalar>(in));
  if (kind == "mlp") {
    int state_dim = 0;
    in >> state_dim;
    return Critic<Scalar>(read_mlp<Scalar>(in), state_dim);
  }
  throw std::runtime_error("checkpoint: unknown critic kind '" + kind + "'");
}

}  // namespace monosched::nn
