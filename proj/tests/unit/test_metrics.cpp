#include <doctest.h>

#include "tenkf/metrics.hpp"
#include "tenkf/oracle.hpp"
#include "tenkf/rng.hpp"

#include <cmath>

using namespace tenkf;

TEST_CASE("ensemble_rmse examples") {
  const Vector truth{{1.0, -2.0}};
  CHECK(ensemble_rmse(truth.replicate(1, 3), truth) == 0.0);
  CHECK(ensemble_rmse(Matrix::Constant(1, 1, 4.0), Vector{{1.0}}) == doctest::Approx(3.0));
  Matrix two(1, 2);
  two << 1.0, 3.0;
  CHECK(ensemble_rmse(two, Vector{{2.0}}) == doctest::Approx(1.0));
  CHECK(mean_rmse(two, Vector{{2.0}}) == 0.0);
  CHECK_THROWS_AS(ensemble_rmse(two, truth), Error);
}

TEST_CASE("ensemble_rmse ignores member and component order") {
  Rng rng(1);
  Matrix m(3, 7);
  fill_standard_normal(m, rng);
  const Vector t = standard_normal(3, rng);
  const double base = ensemble_rmse(m, t);
  Matrix cols = m.rowwise().reverse();
  CHECK(ensemble_rmse(cols, t) == doctest::Approx(base));
  Matrix rows = m.colwise().reverse();
  CHECK(ensemble_rmse(rows, t.reverse()) == doctest::Approx(base));
}

TEST_CASE("time_avg_rmse examples") {
  CHECK(time_avg_rmse(std::vector<double>{2.5, 2.5, 2.5}) == doctest::Approx(2.5));
  CHECK(time_avg_rmse(std::vector<double>{0.0, 2.0}) == doctest::Approx(std::sqrt(2.0)));
  CHECK(time_avg_rmse(std::vector<double>{3.0, 4.0}) == doctest::Approx(std::sqrt(12.5)));
  CHECK_THROWS_AS(time_avg_rmse(std::vector<double>{}), Error);

  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector v = standard_normal(9, rng).cwiseAbs();
    const std::vector<double> s(v.begin(), v.end());
    const double a = time_avg_rmse(s);
    CHECK(a >= v.minCoeff());
    CHECK(a <= v.maxCoeff());
  }
}

TEST_CASE("ks_distance examples") {
  const WeightedSample a({0.3, 1.2, -0.4});
  CHECK(ks_distance(a, a) == 0.0);
  CHECK(ks_distance(WeightedSample({0.0}), WeightedSample({1.0})) == 1.0);
  CHECK(ks_distance(WeightedSample({0.0, 1.0}), WeightedSample({0.0, 1.0}, {0.5, 0.5})) == 0.0);
  CHECK(ks_distance(WeightedSample({0.0, 1.0}), WeightedSample({0.0, 1.0}, {0.9, 0.1})) == doctest::Approx(0.4));

  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> draws(100000);
  for (double& x : draws) x = u(rng);
  const GridAxis axis{0.0, 1.0, 1001};
  const DensityGrid uniform(axis, Vector::Ones(axis.points));
  CHECK(ks_distance(WeightedSample(draws), uniform) < 0.01);
  CHECK(ks_distance(uniform, WeightedSample(draws)) == ks_distance(WeightedSample(draws), uniform));
  CHECK(ks_distance(uniform, uniform) == 0.0);
}

TEST_CASE("ks_distance is symmetric and bounded") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const Vector x = standard_normal(25, rng);
    const Vector y = (standard_normal(40, rng).array() + 0.5).matrix();
    const WeightedSample a(std::vector<double>(x.begin(), x.end()));
    const WeightedSample b(std::vector<double>(y.begin(), y.end()));
    const double ab = ks_distance(a, b);
    CHECK(ab == ks_distance(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
  }
}

TEST_CASE("replicate_quantiles examples") {
  for (double q : replicate_quantiles({4.2})) CHECK(q == 4.2);
  CHECK(replicate_quantiles({5, 1, 4, 2, 3}, {0.5})[0] == 3.0);
  CHECK(replicate_quantiles({1, 2, 3, 4}, {0.25})[0] == doctest::Approx(1.75));
  const auto q = replicate_quantiles({1, 2, 3, 4});
  CHECK(q[1] == doctest::Approx(2.5));
  CHECK(q[2] == doctest::Approx(3.25));
}

TEST_CASE("histogram") {
  const Histogram h = histogram({0.1, 0.2, 0.6, 5.0, -3.0}, 0.0, 1.0, 2);
  CHECK(h.edges == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(h.masses[0] == doctest::Approx(0.6));
  CHECK(h.masses[1] == doctest::Approx(0.4));
  CHECK_THROWS_AS(histogram({std::nan("")}, 0.0, 1.0, 2), Error);
  CHECK_THROWS_AS(histogram({0.5}, 1.0, 0.0, 2), Error);
}

TEST_CASE("sign_test_pvalue") {
  CHECK(sign_test_pvalue(0, 24) == doctest::Approx(1.0));
  CHECK(sign_test_pvalue(24, 24) == doctest::Approx(std::pow(2.0, -24)));
  CHECK(sign_test_pvalue(20, 30) == doctest::Approx(0.04936857335269451).epsilon(1e-10));
  CHECK(sign_test_pvalue(8, 10) == doctest::Approx(0.0546875).epsilon(1e-10));
}
