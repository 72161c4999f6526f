#include "monosched/estimation.hpp"

#include <cmath>
#include <sstream>

namespace monosched {

namespace {

MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

void LtiProcess::validate() const {
  const Index l = A.rows();
  if (l == 0 || A.cols() != l) throw std::invalid_argument("LtiProcess: A must be square and non-empty");
  if (C.cols() != l || C.rows() == 0) throw std::invalid_argument("LtiProcess: C must be meas_dim x state_dim");
  if (W.rows() != l || W.cols() != l) throw std::invalid_argument("LtiProcess: W must be state_dim x state_dim");
  if (V.rows() != C.rows() || V.cols() != C.rows())
    throw std::invalid_argument("LtiProcess: V must be meas_dim x meas_dim");
}

double spectral_radius(const MatrixXd& m) {
  Eigen::EigenSolver<MatrixXd> solver(m, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

MatrixXd propagate_cov(const LtiProcess& proc, const MatrixXd& x) {
  if (x.rows() != proc.state_dim() || x.cols() != proc.state_dim())
    throw std::invalid_argument("propagate_cov: covariance dimension does not match the process");
  return symmetrize(proc.A * x * proc.A.transpose() + proc.W);
}

MatrixXd riccati_update(const LtiProcess& proc, const MatrixXd& p) {
  const MatrixXd prior = propagate_cov(proc, p);
  const MatrixXd innovation = proc.C * prior * proc.C.transpose() + proc.V;
  // K = prior C' S^-1, solved through the symmetric innovation covariance.
  const MatrixXd gain = innovation.ldlt().solve(proc.C * prior).transpose();
  const MatrixXd ikc = MatrixXd::Identity(p.rows(), p.cols()) - gain * proc.C;
  return symmetrize(ikc * prior);
}

MatrixXd steady_state_error_cov(const LtiProcess& proc, double tol, int max_iter) {
  proc.validate();
  if (!(tol > 0)) throw std::invalid_argument("steady_state_error_cov: tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("steady_state_error_cov: max_iter must be >= 1");
  MatrixXd p = proc.W;
  for (int it = 0; it < max_iter; ++it) {
    MatrixXd next = riccati_update(proc, p);
    if (!next.allFinite()) break;
    const double change = (next - p).cwiseAbs().maxCoeff();
    p = std::move(next);
    if (change < tol) return p;
  }
  std::ostringstream msg;
  msg << "steady_state_error_cov: Riccati iteration did not converge within " << max_iter << " steps";
  throw ConvergenceError(msg.str());
}

CostModel::CostModel(MatrixXd pbar, std::vector<double> table)
    : pbar_(std::move(pbar)), table_(std::move(table)) {
  if (table_.empty()) throw std::invalid_argument("CostModel: empty cost table");
  for (std::size_t i = 0; i < table_.size(); ++i) {
    if (!(table_[i] > 0) || !std::isfinite(table_[i]))
      throw std::invalid_argument("CostModel: costs must be positive and finite");
    if (i > 0 && table_[i] < table_[i - 1])
      throw std::invalid_argument("CostModel: costs must be non-decreasing in AoI");
  }
}

CostModel CostModel::build(const LtiProcess& proc, int tau_max, double tol, int max_iter) {
  if (tau_max < 1) throw std::invalid_argument("CostModel: tau_max must be >= 1");
  MatrixXd pbar = steady_state_error_cov(proc, tol, max_iter);
  std::vector<double> table;
  table.reserve(tau_max);
  MatrixXd x = pbar;
  for (int tau = 1; tau <= tau_max; ++tau) {
    x = propagate_cov(proc, x);
    table.push_back(x.trace());
  }
  return CostModel(std::move(pbar), std::move(table));
}

CostModel CostModel::from_table(std::vector<double> table) {
  return CostModel(MatrixXd(), std::move(table));
}

double CostModel::operator()(int tau) const {
  if (tau < 1) throw std::invalid_argument("CostModel: AoI must be >= 1");
  const int idx = tau > tau_max() ? tau_max() : tau;
  return table_[idx - 1];
}

double aoi_cost(const CostModel& model, const LtiProcess& proc, int tau) {
  if (tau < 1) throw std::invalid_argument("aoi_cost: AoI must be >= 1");
  const int steps = tau > model.tau_max() ? model.tau_max() : tau;
  MatrixXd x = model.pbar();
  for (int i = 0; i < steps; ++i) x = propagate_cov(proc, x);
  return x.trace();
}

LtiProcess sample_process(Rng& rng, int state_dim, int meas_dim,
                          std::pair<double, double> spectral_range, int max_attempts) {
  const auto [lo, hi] = spectral_range;
  if (state_dim < 1 || meas_dim < 1) throw std::invalid_argument("sample_process: dimensions must be positive");
  if (!(lo > 0) || !(hi >= lo)) throw std::invalid_argument("sample_process: spectral range must satisfy 0 < lo <= hi");

  std::normal_distribution<double> normal(0.0, 1.0);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    LtiProcess proc;
    const double target = lo + (hi - lo) * uniform_open01(rng);
    MatrixXd base(state_dim, state_dim);
    for (Index j = 0; j < base.cols(); ++j)
      for (Index i = 0; i < base.rows(); ++i) base(i, j) = normal(rng);
    const double rho = spectral_radius(base);
    if (!(rho > 1e-8)) continue;
    proc.A = base * (target / rho);
    proc.C.resize(meas_dim, state_dim);
    for (Index j = 0; j < proc.C.cols(); ++j)
      for (Index i = 0; i < proc.C.rows(); ++i) proc.C(i, j) = uniform_open01(rng);
    proc.W = MatrixXd::Identity(state_dim, state_dim);
    proc.V = MatrixXd::Identity(meas_dim, meas_dim);
    try {
      steady_state_error_cov(proc);
    } catch (const ConvergenceError&) {
      continue;
    }
    return proc;
  }
  throw ConvergenceError("sample_process: no detectable process found within the retry budget");
}

}  // namespace monosched
