#include <doctest.h>

#include "monosched/estimation.hpp"

using namespace monosched;

namespace {

LtiProcess scalar_process(double a, double c, double w, double v) {
  LtiProcess p;
  p.A = MatrixXd::Constant(1, 1, a);
  p.C = MatrixXd::Constant(1, 1, c);
  p.W = MatrixXd::Constant(1, 1, w);
  p.V = MatrixXd::Constant(1, 1, v);
  return p;
}

// Independent scalar oracle: posterior fixed point of P = M v / (c^2 M + v), M = a^2 P + w.
double scalar_fixed_point(double a, double c, double w, double v) {
  double p = w;
  for (int i = 0; i < 100000; ++i) {
    const double prior = a * a * p + w;
    const double next = prior * v / (c * c * prior + v);
    if (std::abs(next - p) < 1e-15) return next;
    p = next;
  }
  return p;
}

}  // namespace

TEST_CASE("scalar Riccati fixed points") {
  // a = 0: every step resets the prior to W = 1, so Pbar = 1 * 1 / (1 + 1).
  CHECK(steady_state_error_cov(scalar_process(0.0, 1.0, 1.0, 1.0))(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  // a = c = w = v = 1: P^2 + P - 1 = 0.
  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  CHECK(steady_state_error_cov(scalar_process(1.0, 1.0, 1.0, 1.0))(0, 0) == doctest::Approx(golden).epsilon(1e-9));
  for (double a : {0.5, 1.1, 1.3})
    CHECK(steady_state_error_cov(scalar_process(a, 0.7, 1.0, 2.0))(0, 0) ==
          doctest::Approx(scalar_fixed_point(a, 0.7, 1.0, 2.0)).epsilon(1e-8));
}

TEST_CASE("matrix Riccati fixed point satisfies the update") {
  Rng rng(7);
  const LtiProcess p = sample_process(rng, 3, 2, {1.0, 1.3});
  const MatrixXd pbar = steady_state_error_cov(p);
  CHECK((riccati_update(p, pbar) - pbar).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((pbar - pbar.transpose()).norm() < 1e-12);
  CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(pbar).eigenvalues().minCoeff() > 0);
}

TEST_CASE("cost iteration matches hand value") {
  // A = 1.1, W = 1, Pbar = 0.7: f(x) = 1.21 x + 1 applied three times.
  const LtiProcess p = scalar_process(1.1, 1.0, 1.0, 1.0);
  MatrixXd x = MatrixXd::Constant(1, 1, 0.7);
  for (int i = 0; i < 3; ++i) x = propagate_cov(p, x);
  // Closed form: 1.1^6 * 0.7 + 1.1^4 + 1.1^2 + 1 = 4.9141927.
  CHECK(x(0, 0) == doctest::Approx(4.9141927).epsilon(1e-12));
  const CostModel model(MatrixXd::Constant(1, 1, 0.7), {1.847, 3.23487, 4.9141927});
  CHECK(model(3) == doctest::Approx(4.9141927));
  CHECK(model(10) == model(3));
}

TEST_CASE("cost model with A = I grows by trace(W) per step") {
  LtiProcess p;
  p.A = MatrixXd::Identity(2, 2);
  p.C = (MatrixXd(2, 2) << 0.3, 0.8, 0.5, -0.2).finished();
  p.W = MatrixXd::Identity(2, 2);
  p.V = MatrixXd::Identity(2, 2);
  const CostModel g = CostModel::build(p, 20);
  for (int tau = 1; tau <= 20; ++tau) CHECK(g(tau) == doctest::Approx(g(1) + (tau - 1) * 2.0).epsilon(1e-9));
  CHECK(aoi_cost(g, p, 7) == doctest::Approx(g(7)).epsilon(1e-12));
}

TEST_CASE("generated processes give positive non-decreasing costs") {
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    const LtiProcess p = sample_process(rng, 2, 1, {1.0, 1.3});
    const double rho = spectral_radius(p.A);
    CHECK(rho > 1.0);
    CHECK(rho < 1.3 + 1e-12);
    const CostModel g = CostModel::build(p, 12);
    for (int tau = 1; tau <= 12; ++tau) {
      CHECK(g(tau) > 0);
      if (tau > 1) CHECK(g(tau) >= g(tau - 1));
    }
  }
}

TEST_CASE("cost model rejects bad tables and shapes") {
  CHECK_THROWS_AS(CostModel::from_table({1.0, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(CostModel::from_table({-1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(CostModel::from_table({}), std::invalid_argument);
  LtiProcess bad = scalar_process(1.0, 1.0, 1.0, 1.0);
  bad.C = MatrixXd::Ones(1, 2);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(propagate_cov(scalar_process(1, 1, 1, 1), MatrixXd::Identity(2, 2)), std::invalid_argument);
  Rng rng(1);
  CHECK_THROWS_AS(sample_process(rng, 0, 1, {1.0, 1.3}), std::invalid_argument);
}

TEST_CASE("undetectable unstable process fails to converge") {
  // C = 0 with |a| > 1: the error covariance grows without bound.
  CHECK_THROWS_AS(steady_state_error_cov(scalar_process(1.2, 0.0, 1.0, 1.0)), ConvergenceError);
}
