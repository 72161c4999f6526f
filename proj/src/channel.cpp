#include "monosched/channel.hpp"

#include <cmath>
#include <sstream>

namespace monosched {

VectorXd quantize_rayleigh(double scale, int levels) {
  if (!(scale > 0)) throw std::invalid_argument("quantize_rayleigh: scale must be positive");
  if (levels < 2) throw std::invalid_argument("quantize_rayleigh: need at least two levels");
  return VectorXd::Constant(levels, 1.0 / levels);
}

double rayleigh_cdf(double x, double scale) {
  if (x <= 0) return 0.0;
  return -std::expm1(-x * x / (2.0 * scale * scale));
}

VectorXd quantize_rayleigh(double scale, const std::vector<double>& thresholds) {
  if (!(scale > 0)) throw std::invalid_argument("quantize_rayleigh: scale must be positive");
  if (thresholds.empty()) throw std::invalid_argument("quantize_rayleigh: need at least one threshold");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0) || (i > 0 && !(thresholds[i] > thresholds[i - 1])))
      throw std::invalid_argument("quantize_rayleigh: thresholds must be positive and strictly ascending");
  }
  const Index levels = static_cast<Index>(thresholds.size()) + 1;
  VectorXd q(levels);
  double prev = 0.0;
  for (Index j = 0; j + 1 < levels; ++j) {
    const double cdf = rayleigh_cdf(thresholds[j], scale);
    q(j) = cdf - prev;
    prev = cdf;
  }
  q(levels - 1) = 1.0 - prev;
  return q;
}

VectorXd default_drop_probs() {
  VectorXd p(5);
  p << 0.01, 0.05, 0.1, 0.15, 0.2;
  return p;
}

ChannelModel::ChannelModel(int num_devices, int num_channels, int levels, std::vector<VectorXd> level_probs,
                           std::vector<VectorXd> drop_probs, DropOrdering ordering)
    : num_devices_(num_devices),
      num_channels_(num_channels),
      levels_(levels),
      q_(std::move(level_probs)),
      drop_(std::move(drop_probs)) {
  if (num_devices < 1 || num_channels < 1) throw std::invalid_argument("ChannelModel: N and M must be positive");
  if (levels < 1) throw std::invalid_argument("ChannelModel: levels must be positive");
  const std::size_t pairs = static_cast<std::size_t>(num_devices) * num_channels;
  if (q_.size() != pairs) throw std::invalid_argument("ChannelModel: need one level distribution per (n, m)");
  if (drop_.size() != 1 && drop_.size() != pairs)
    throw std::invalid_argument("ChannelModel: drop tables must be shared or one per (n, m)");

  cdf_.reserve(pairs);
  for (const VectorXd& q : q_) {
    if (q.size() != levels) throw std::invalid_argument("ChannelModel: level distribution has wrong length");
    if ((q.array() < 0).any()) throw std::invalid_argument("ChannelModel: negative level probability");
    if (std::abs(q.sum() - 1.0) > 1e-12) throw std::invalid_argument("ChannelModel: level probabilities must sum to 1");
    VectorXd cdf(levels);
    double acc = 0.0;
    for (Index j = 0; j < levels; ++j) cdf(j) = (acc += q(j));
    cdf(levels - 1) = 1.0;
    cdf_.push_back(std::move(cdf));
  }
  for (const VectorXd& p : drop_) {
    if (p.size() != levels) throw std::invalid_argument("ChannelModel: drop table has wrong length");
    if ((p.array() < 0).any() || (p.array() > 1).any())
      throw std::invalid_argument("ChannelModel: drop probabilities must lie in [0, 1]");
    if (ordering == DropOrdering::kNonDecreasing) {
      for (Index j = 1; j < levels; ++j)
        if (p(j) < p(j - 1))
          throw std::invalid_argument("ChannelModel: drop probability must be non-decreasing in the level index");
    }
  }
}

ChannelModel ChannelModel::shared(int num_devices, int num_channels, const VectorXd& level_probs,
                                  const VectorXd& drop_probs, DropOrdering ordering) {
  const std::size_t pairs = static_cast<std::size_t>(num_devices) * num_channels;
  return ChannelModel(num_devices, num_channels, static_cast<int>(level_probs.size()),
                      std::vector<VectorXd>(pairs, level_probs), {drop_probs}, ordering);
}

double ChannelModel::drop_probability(int n, int m, int h) const {
  if (n < 0 || n >= num_devices_ || m < 0 || m >= num_channels_) {
    std::ostringstream msg;
    msg << "drop_probability: (n, m) = (" << n << ", " << m << ") out of range";
    throw std::invalid_argument(msg.str());
  }
  if (h < 1 || h > levels_) {
    std::ostringstream msg;
    msg << "drop_probability: level " << h << " outside {1.." << levels_ << "}";
    throw std::invalid_argument(msg.str());
  }
  return drop_table(n, m)(h - 1);
}

double ChannelModel::matrix_probability(const ChannelMatrix& h) const {
  double p = 1.0;
  for (int n = 0; n < num_devices_; ++n)
    for (int m = 0; m < num_channels_; ++m) p *= level_probs(n, m)(h(n, m) - 1);
  return p;
}

ChannelMatrix ChannelModel::sample(Rng& rng) const {
  ChannelMatrix h(num_devices_, num_channels_);
  for (int n = 0; n < num_devices_; ++n) {
    for (int m = 0; m < num_channels_; ++m) {
      const VectorXd& cdf = cdf_[pair_index(n, m)];
      const double u = uniform01(rng);
      int level = 0;
      while (level + 1 < levels_ && u >= cdf(level)) ++level;
      h(n, m) = level + 1;
    }
  }
  return h;
}

}  // namespace monosched
