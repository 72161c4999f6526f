#include <doctest.h>

#include <map>
#include <sstream>

#include "monosched/env.hpp"
#include "monosched/exact.hpp"

using namespace monosched;

namespace {

SchedulingEnv two_by_one(int tau_cap = 6) {
  const VectorXd q = VectorXd::Constant(2, 0.5);
  const VectorXd p = (VectorXd(2) << 0.1, 0.5).finished();
  return SchedulingEnv(ChannelModel::shared(2, 1, q, p),
                       {CostModel::from_table({1, 2, 4, 8, 16, 32}), CostModel::from_table({1, 1.5, 2, 2.5, 3, 3.5})},
                       tau_cap);
}

SystemState make_state(std::initializer_list<int> tau, std::initializer_list<int> h, int m) {
  SystemState s;
  s.tau = Eigen::Map<const VectorXi>(std::data(tau), static_cast<Index>(tau.size()));
  s.h = Eigen::Map<const Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      std::data(h), static_cast<Index>(tau.size()), m);
  return s;
}

}  // namespace

TEST_CASE("feasibility of schedules") {
  CHECK(validate_action((VectorXi(3) << 1, 0, 2).finished(), 3, 2));
  CHECK(validate_action((VectorXi(3) << 2, 1, 0).finished(), 3, 2));
  CHECK_FALSE(validate_action((VectorXi(3) << 1, 1, 0).finished(), 3, 2));
  CHECK_FALSE(validate_action((VectorXi(3) << 1, 0, 0).finished(), 3, 2));
  CHECK_FALSE(validate_action((VectorXi(3) << 1, 3, 0).finished(), 3, 2));
  CHECK_FALSE(validate_action((VectorXi(3) << 1, -1, 2).finished(), 3, 2));
  CHECK_FALSE(validate_action((VectorXi(2) << 1, 0).finished(), 3, 1));
}

TEST_CASE("reward is minus the summed cost of the current state") {
  const SchedulingEnv env = two_by_one();
  const SystemState s = make_state({3, 2}, {1, 2}, 1);
  CHECK(env.reward(s) == -(4.0 + 1.5));
  CHECK(env.sum_cost(s) == 5.5);
  Rng rng(1);
  const StepOutcome out = env.step(s, (VectorXi(2) << 1, 0).finished(), rng);
  CHECK(out.reward == -5.5);
  CHECK(out.next_state.tau(1) == 3);
  CHECK((out.next_state.tau(0) == 1) == out.delivered[0]);
  CHECK_FALSE(out.delivered[1]);
}

TEST_CASE("infeasible schedule is a contract violation") {
  const SchedulingEnv env = two_by_one();
  Rng rng(1);
  CHECK_THROWS_AS(env.step(make_state({1, 1}, {1, 1}, 1), (VectorXi(2) << 1, 1).finished(), rng), ContractViolation);
}

TEST_CASE("AoI saturates at the cap") {
  const SchedulingEnv env = two_by_one(4);
  Rng rng(2);
  SystemState s = make_state({4, 4}, {2, 2}, 1);
  for (int i = 0; i < 50; ++i) {
    const StepOutcome out = env.step(s, (VectorXi(2) << 0, 1).finished(), rng);
    CHECK(out.next_state.tau(0) == 4);
    CHECK(out.next_state.tau(1) <= 4);
    s = out.next_state;
  }
}

TEST_CASE("state encoding layout") {
  const SystemState s = make_state({2, 5, 1}, {1, 2, 3, 4, 5, 1}, 2);
  const VectorXd x = encode_state(s, 10, 5);
  REQUIRE(x.size() == 9);
  CHECK(x(1) == 0.5);
  CHECK(x(channel_feature_index(3, 2, 1, 0)) == 3.0 / 5.0);
  CHECK(x(channel_feature_index(3, 2, 2, 1)) == 1.0 / 5.0);
  CHECK(channel_feature_index(3, 2, 0, 0) == 3);
}

TEST_CASE("transition probabilities sum to one and match sampling") {
  const SchedulingEnv env = two_by_one();
  const StateSpace space(2, 1, 6, 2);
  const SystemState s = make_state({2, 5}, {1, 2}, 1);
  for (const ScheduleAction& a : enumerate_actions(2, 1)) {
    double total = 0;
    for (Index i = 0; i < space.size(); ++i) total += env.transition_prob(s, a, space.state(i));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  }
  const ScheduleAction a = (VectorXi(2) << 0, 1).finished();
  Rng rng(5);
  const int draws = 40000;
  std::map<Index, int> counts;
  for (int i = 0; i < draws; ++i) ++counts[space.index(env.step(s, a, rng).next_state)];
  for (Index i = 0; i < space.size(); ++i) {
    const double p = env.transition_prob(s, a, space.state(i));
    const double sigma = std::sqrt(draws * p * (1 - p));
    CHECK(std::abs(counts[i] - draws * p) <= 3 * sigma + 1e-9);
  }
}

TEST_CASE("trajectory rows") {
  std::ostringstream out;
  write_trajectory_header(out, 2, 1);
  write_trajectory_row(out, 3, make_state({1, 2}, {2, 1}, 1), (VectorXi(2) << 1, 0).finished(), -2.5);
  CHECK(out.str() == "t,tau0,tau1,h0_0,h1_0,a0,a1,reward\n3,1,2,2,1,1,0,-2.5\n");
}
