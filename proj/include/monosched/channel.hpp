#pragma once

// i.i.d. block-fading channels quantized to a finite set of levels.
//
// Indexing: devices n and channels m are 0-based (rows/columns of the channel
// matrix); levels h are 1-based, h in {1..levels}. Level indices are ordered so
// that the packet drop probability is non-decreasing in h.

#include <vector>

#include "monosched/common.hpp"

namespace monosched {

/// N x M matrix of channel levels, entries in {1..levels}.
using ChannelMatrix = MatrixXi;

/// Level probabilities under the equal-quantile scheme: every level carries 1/levels
/// of the Rayleigh(scale) gain distribution, so the result does not depend on scale.
VectorXd quantize_rayleigh(double scale, int levels);

/// Level probabilities for explicit ascending gain cut-points; level j covers the
/// j-th gain interval [t_{j-1}, t_j) with t_0 = 0 and a final open interval.
VectorXd quantize_rayleigh(double scale, const std::vector<double>& thresholds);

/// Rayleigh(scale) CDF, 1 - exp(-x^2 / (2 scale^2)).
double rayleigh_cdf(double x, double scale);

/// Default drop table: level 1 -> 0.01, ..., level 5 -> 0.2.
VectorXd default_drop_probs();

class ChannelModel {
 public:
  enum class DropOrdering { kNonDecreasing, kUnchecked };

  ChannelModel() = default;

  /// level_probs: N*M vectors (row-major over (n, m)) of length `levels`.
  /// drop_probs: either one shared vector of length `levels` or N*M of them.
  /// kUnchecked skips the monotone-drop check (negative-control instances only).
  ChannelModel(int num_devices, int num_channels, int levels, std::vector<VectorXd> level_probs,
               std::vector<VectorXd> drop_probs, DropOrdering ordering = DropOrdering::kNonDecreasing);

  /// Every (n, m) uses the same level distribution and the same drop table.
  static ChannelModel shared(int num_devices, int num_channels, const VectorXd& level_probs,
                             const VectorXd& drop_probs,
                             DropOrdering ordering = DropOrdering::kNonDecreasing);

  int num_devices() const { return num_devices_; }
  int num_channels() const { return num_channels_; }
  int levels() const { return levels_; }
  bool drop_is_shared() const { return drop_.size() == 1; }

  const VectorXd& level_probs(int n, int m) const { return q_[pair_index(n, m)]; }
  const VectorXd& drop_table(int n, int m) const { return drop_[drop_is_shared() ? 0 : pair_index(n, m)]; }

  /// p at level h for device n on channel m; throws std::invalid_argument on bad indices.
  double drop_probability(int n, int m, int h) const;

  /// Pr(H) = prod_{n,m} q^{(n,m)}_{h_{n,m}}.
  double matrix_probability(const ChannelMatrix& h) const;

  /// Each entry drawn independently from its level distribution.
  ChannelMatrix sample(Rng& rng) const;

 private:
  std::size_t pair_index(int n, int m) const {
    return static_cast<std::size_t>(n) * num_channels_ + m;
  }

  int num_devices_ = 0;
  int num_channels_ = 0;
  int levels_ = 0;
  std::vector<VectorXd> q_;
  std::vector<VectorXd> cdf_;
  std::vector<VectorXd> drop_;
};

inline ChannelMatrix sample_channel_matrix(const ChannelModel& model, Rng& rng) { return model.sample(rng); }

inline double drop_probability(const ChannelModel& model, int n, int m, int h) {
  return model.drop_probability(n, m, h);
}

}  // namespace monosched
