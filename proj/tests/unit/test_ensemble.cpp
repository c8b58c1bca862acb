#include <doctest.h>

#include "tenkf/ensemble.hpp"

#include <algorithm>
#include <map>
#include <numeric>

using namespace tenkf;

namespace {

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

}  // namespace

TEST_CASE("sample_mean") {
  CHECK(sample_mean(row({1, 3}))[0] == 2.0);
  CHECK(sample_mean(Matrix::Zero(2, 2)).isZero());
  CHECK(sample_mean(row({1, 2, 6}))[0] == doctest::Approx(3.0));
  CHECK(sample_mean(Ensemble(row({4, 8})))[0] == 6.0);
  CHECK_THROWS_AS(sample_mean(Matrix(3, 0)), Error);
}

TEST_CASE("cross_covariance") {
  CHECK(cross_covariance(row({1, 3}), row({1, 3}))(0, 0) == doctest::Approx(2.0));
  CHECK(cross_covariance(row({1, 2}), row({5, 5}))(0, 0) == 0.0);
  CHECK(cross_covariance(row({0, 1, 2}), row({0, 2, 4}))(0, 0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(cross_covariance(row({1}), row({1})), Error);
  CHECK_THROWS_AS(cross_covariance(row({1, 2}), row({1, 2, 3})), Error);
}

TEST_CASE("cross_covariance(x, x) is symmetric positive semidefinite") {
  Rng rng(5);
  Matrix x(4, 30);
  fill_standard_normal(x, rng);
  const Matrix c = cross_covariance(x, x);
  CHECK((c - c.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(c);
  CHECK(eig.eigenvalues().minCoeff() > -1e-10);
}

TEST_CASE("kalman_gain") {
  SUBCASE("scalar ratio") {
    // C_XY = 1 and C_YY = 2 for x = (-1, 1), y = (-sqrt2, sqrt2)
    const JointEnsemble j(row({-1, 1}), row({-std::sqrt(2.0), std::sqrt(2.0)}));
    const double cxy = cross_covariance(j.states, j.observations)(0, 0);
    const double cyy = cross_covariance(j.observations, j.observations)(0, 0);
    CHECK(kalman_gain(j).gain(0, 0) == doctest::Approx(cxy / cyy).epsilon(1e-9));
    CHECK(gain_from_covariances(Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 2.0)).gain(0, 0) ==
          doctest::Approx(0.5).epsilon(1e-9));
  }
  SUBCASE("identical state and observation ensembles give the identity") {
    Rng rng(3);
    Matrix x(3, 50);
    fill_standard_normal(x, rng);
    const KalmanGain k = kalman_gain(JointEnsemble(x, x));
    CHECK((k.gain - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-8);
  }
  SUBCASE("hand example") {
    CHECK(kalman_gain(JointEnsemble(row({0, 1, 2}), row({0, 2, 4}))).gain(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
  }
  SUBCASE("singular observation covariance") {
    CHECK_THROWS_AS(kalman_gain(JointEnsemble(row({0, 1, 2}), row({5, 5, 5}))), SingularMatrixError);
  }
  SUBCASE("invariant under member permutation") {
    Rng rng(9);
    Matrix x(2, 40), y(3, 40);
    fill_standard_normal(x, rng);
    fill_standard_normal(y, rng);
    std::vector<Index> perm(40);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const JointEnsemble j(x, y);
    const KalmanGain a = kalman_gain(j);
    const KalmanGain b = kalman_gain(gather(j, perm));
    CHECK((a.gain - b.gain).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("misaligned joint ensemble is rejected") {
  CHECK_THROWS_AS(JointEnsemble(Matrix::Zero(2, 3), Matrix::Zero(1, 4)), Error);
}

TEST_CASE("effective_size") {
  CHECK(effective_size(WeightVector::from_unnormalized(Vector{{0.5, 0.5}})) == doctest::Approx(2.0));
  CHECK(effective_size(WeightVector::from_unnormalized(Vector{{1, 0, 0}})) == doctest::Approx(1.0));
  CHECK(effective_size(WeightVector::from_unnormalized(Vector{{0.5, 0.25, 0.25}})) == doctest::Approx(1.0 / 0.375));
  for (Index n : {1, 7, 1000}) CHECK(effective_size(WeightVector::uniform(n)) == static_cast<double>(n));
}

TEST_CASE("WeightVector normalization") {
  const WeightVector w = WeightVector::from_log(Vector{{-1000.0, -1001.0, -std::numeric_limits<double>::infinity()}});
  CHECK(w.values().sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w[2] == 0.0);
  CHECK(w[0] / w[1] == doctest::Approx(std::exp(1.0)));
  CHECK_THROWS_AS(WeightVector::from_unnormalized(Vector{{0.0, 0.0}}), Error);
  CHECK_THROWS_AS(WeightVector::from_unnormalized(Vector{{1.0, -0.5}}), Error);
}

TEST_CASE("bootstrap_resample") {
  SUBCASE("point mass") {
    const JointEnsemble j(row({10, 20}), row({1, 2}));
    Rng rng(1);
    const JointEnsemble r = bootstrap_resample(j, WeightVector::from_unnormalized(Vector{{1.0, 0.0}}), rng);
    CHECK((r.states.array() == 10.0).all());
    CHECK((r.observations.array() == 1.0).all());
  }
  SUBCASE("golden index sequence at seed 42") {
    Rng rng(42);
    const auto idx = resample_indices(WeightVector::uniform(10), 10, rng);
    // Recorded with mt19937_64 and libstdc++ discrete_distribution.
    const std::vector<Index> golden = {7, 6, 7, 1, 9, 0, 5, 3, 2, 3};
    CHECK(idx == golden);
  }
  SUBCASE("multinomial frequencies") {
    Rng rng(7);
    const auto idx = resample_indices(WeightVector::from_unnormalized(Vector{{0.7, 0.3}}), 100000, rng);
    const double f0 = static_cast<double>(std::count(idx.begin(), idx.end(), 0)) / 1e5;
    CHECK(f0 == doctest::Approx(0.7).epsilon(0.01 / 0.7));
  }
  SUBCASE("systematic frequencies") {
    Rng rng(7);
    const auto idx = resample_indices(WeightVector::from_unnormalized(Vector{{0.7, 0.3}}), 1000, rng,
                                      ResampleScheme::Systematic);
    CHECK(std::abs(static_cast<double>(std::count(idx.begin(), idx.end(), 0)) - 700.0) <= 1.0);
  }
  SUBCASE("pairs are never split") {
    Rng rng(11);
    Matrix x(2, 25), y(1, 25);
    fill_standard_normal(x, rng);
    fill_standard_normal(y, rng);
    const JointEnsemble j(x, y);
    Vector raw(25);
    for (Index i = 0; i < 25; ++i) raw[i] = 1.0 + static_cast<double>(i % 5);
    const JointEnsemble r = bootstrap_resample(j, WeightVector::from_unnormalized(raw), rng, 60);
    CHECK(r.size() == 60);
    for (Index c = 0; c < r.size(); ++c) {
      bool found = false;
      for (Index i = 0; i < 25 && !found; ++i)
        found = r.states.col(c) == x.col(i) && r.observations(0, c) == y(0, i);
      CHECK(found);
    }
  }
  SUBCASE("same seed, same indices") {
    Rng a(123), b(123);
    const WeightVector w = WeightVector::from_unnormalized(Vector::LinSpaced(50, 1.0, 2.0));
    CHECK(resample_indices(w, 50, a) == resample_indices(w, 50, b));
  }
}
