#pragma once

// Remote-estimation cost model.
//
// Each edge device runs a local Kalman filter on an LTI process
//   e[t+1] = A e[t] + w[t],   z[t] = C e[t] + v[t],   w ~ N(0, W), v ~ N(0, V).
// When the remote estimator last heard from the device tau steps ago, its error
// covariance is f^tau(Pbar) with f(X) = A X A' + W and Pbar the local filter's
// steady-state (posterior) error covariance. The scheduling cost is its trace.

#include <utility>
#include <vector>

#include "monosched/common.hpp"

namespace monosched {

struct LtiProcess {
  MatrixXd A;  // state_dim x state_dim
  MatrixXd C;  // meas_dim x state_dim
  MatrixXd W;  // process noise covariance, PSD
  MatrixXd V;  // measurement noise covariance, PD

  Index state_dim() const { return A.rows(); }
  Index meas_dim() const { return C.rows(); }

  /// Throws std::invalid_argument if the matrix shapes are inconsistent.
  void validate() const;
};

/// Largest eigenvalue modulus of a square matrix.
double spectral_radius(const MatrixXd& m);

/// One open-loop covariance step f(X) = A X A' + W, symmetrized.
MatrixXd propagate_cov(const LtiProcess& proc, const MatrixXd& x);

/// One full predict-then-update Riccati step on the posterior error covariance.
MatrixXd riccati_update(const LtiProcess& proc, const MatrixXd& p);

/// Fixed point of riccati_update iterated from W. Stops once the max-abs
/// elementwise change drops below tol; throws ConvergenceError after max_iter.
MatrixXd steady_state_error_cov(const LtiProcess& proc, double tol = 1e-9, int max_iter = 100000);

/// Tabulated AoI cost g(tau) = trace(f^tau(Pbar)) for tau in 1..tau_max.
/// Lookups past tau_max return g(tau_max).
class CostModel {
 public:
  CostModel() = default;
  CostModel(MatrixXd pbar, std::vector<double> table);

  /// Builds the table by iterating propagate_cov from Pbar.
  static CostModel build(const LtiProcess& proc, int tau_max, double tol = 1e-9,
                         int max_iter = 100000);
  /// Table from explicit values (tests, hand-built instances). Must be positive
  /// and non-decreasing.
  static CostModel from_table(std::vector<double> table);

  double operator()(int tau) const;
  int tau_max() const { return static_cast<int>(table_.size()); }
  const MatrixXd& pbar() const { return pbar_; }
  const std::vector<double>& table() const { return table_; }

 private:
  MatrixXd pbar_;
  std::vector<double> table_;
};

/// trace(f^tau(Pbar)) computed directly, with tau clamped to model.tau_max().
double aoi_cost(const CostModel& model, const LtiProcess& proc, int tau);

/// Random process: A with spectral radius drawn uniformly from spectral_range,
/// C entries uniform(0, 1), W = I, V = I. Redraws until the Riccati iteration
/// converges; throws ConvergenceError after max_attempts.
LtiProcess sample_process(Rng& rng, int state_dim, int meas_dim,
                          std::pair<double, double> spectral_range, int max_attempts = 100);

}  // namespace monosched
