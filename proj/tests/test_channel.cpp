#include <doctest.h>

#include "monosched/channel.hpp"

using namespace monosched;

TEST_CASE("equal-quantile quantization gives uniform levels") {
  for (int levels : {2, 3, 5}) {
    const VectorXd q = quantize_rayleigh(1.0, levels);
    REQUIRE(q.size() == levels);
    for (Index i = 0; i < q.size(); ++i) CHECK(q(i) == doctest::Approx(1.0 / levels).epsilon(1e-12));
  }
  CHECK_THROWS_AS(quantize_rayleigh(1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(quantize_rayleigh(0.0, 3), std::invalid_argument);
}

TEST_CASE("threshold quantization follows the Rayleigh CDF") {
  // Pr(gain < 1) = 1 - exp(-1/2) for unit scale.
  const VectorXd q = quantize_rayleigh(1.0, std::vector<double>{1.0});
  CHECK(q(0) == doctest::Approx(0.3934693403).epsilon(1e-9));
  CHECK(q(1) == doctest::Approx(0.6065306597).epsilon(1e-9));
  CHECK(rayleigh_cdf(2.0, 2.0) == doctest::Approx(1.0 - std::exp(-0.5)));
  const VectorXd q3 = quantize_rayleigh(1.5, std::vector<double>{0.5, 1.0, 2.0});
  CHECK(q3.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(quantize_rayleigh(1.0, std::vector<double>{1.0, 0.5}), std::invalid_argument);
}

TEST_CASE("default drop table is non-decreasing in the level") {
  const VectorXd p = default_drop_probs();
  REQUIRE(p.size() == 5);
  CHECK(p(0) == 0.01);
  CHECK(p(4) == 0.2);
  for (Index i = 1; i < p.size(); ++i) CHECK(p(i) >= p(i - 1));
}

TEST_CASE("channel model validation") {
  const VectorXd q = VectorXd::Constant(2, 0.5);
  const VectorXd p = (VectorXd(2) << 0.1, 0.5).finished();
  const ChannelModel ok = ChannelModel::shared(2, 1, q, p);
  CHECK(ok.drop_probability(0, 0, 1) == 0.1);
  CHECK(ok.drop_probability(1, 0, 2) == 0.5);
  CHECK_THROWS_AS(ok.drop_probability(2, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(ok.drop_probability(0, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(ok.drop_probability(0, 0, 3), std::invalid_argument);
  CHECK_THROWS_AS(ChannelModel::shared(2, 1, q, p.reverse()), std::invalid_argument);
  CHECK_NOTHROW(ChannelModel::shared(2, 1, q, p.reverse(), ChannelModel::DropOrdering::kUnchecked));
  CHECK_THROWS_AS(ChannelModel::shared(2, 1, VectorXd::Constant(2, 0.4), p), std::invalid_argument);
  CHECK_THROWS_AS(ChannelModel::shared(2, 1, q, (VectorXd(2) << 0.1, 1.5).finished()), std::invalid_argument);
}

TEST_CASE("matrix probability is a product and sums to one") {
  const VectorXd q = (VectorXd(3) << 0.2, 0.3, 0.5).finished();
  const ChannelModel model = ChannelModel::shared(2, 1, q, default_drop_probs().head(3));
  double total = 0;
  for (int a = 1; a <= 3; ++a)
    for (int b = 1; b <= 3; ++b) {
      ChannelMatrix h(2, 1);
      h << a, b;
      CHECK(model.matrix_probability(h) == doctest::Approx(q(a - 1) * q(b - 1)));
      total += model.matrix_probability(h);
    }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("sampled level frequencies within 3 sigma") {
  const VectorXd q = (VectorXd(3) << 0.2, 0.3, 0.5).finished();
  const ChannelModel model = ChannelModel::shared(2, 2, q, default_drop_probs().head(3));
  Rng rng(3);
  const int draws = 20000;
  Eigen::Vector3d counts = Eigen::Vector3d::Zero();
  for (int i = 0; i < draws; ++i) {
    const ChannelMatrix h = sample_channel_matrix(model, rng);
    REQUIRE(h.minCoeff() >= 1);
    REQUIRE(h.maxCoeff() <= 3);
    counts(h(1, 0) - 1) += 1;
  }
  for (int l = 0; l < 3; ++l) {
    const double sigma = std::sqrt(draws * q(l) * (1 - q(l)));
    CHECK(std::abs(counts(l) - draws * q(l)) < 3 * sigma);
  }
}
