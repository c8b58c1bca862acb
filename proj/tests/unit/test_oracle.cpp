#include <doctest.h>

#include "tenkf/metrics.hpp"
#include "tenkf/oracle.hpp"

#include <cmath>
#include <numbers>

using namespace tenkf;

namespace {

double normal_pdf(double x, double m, double v) {
  return std::exp(-0.5 * (x - m) * (x - m) / v) / std::sqrt(2.0 * std::numbers::pi * v);
}

// Standard bivariate normal with correlation rho.
JointGrid bivariate(double rho, Index points) {
  const GridAxis axis{-8.0, 8.0, points};
  const double det = 1.0 - rho * rho;
  return JointGrid::tabulate(axis, axis, [=](double x, double y) {
    return std::exp(-0.5 * (x * x - 2.0 * rho * x * y + y * y) / det) / (2.0 * std::numbers::pi * std::sqrt(det));
  });
}

DensityGrid gaussian_grid(const GridAxis& axis, double m, double v) {
  Vector vals(axis.points);
  for (Index i = 0; i < axis.points; ++i) vals[i] = normal_pdf(axis.at(i), m, v);
  return DensityGrid(axis, vals).normalize();
}

}  // namespace

TEST_CASE("grid quadrature") {
  const GridAxis axis{-1.0, 1.0, 3};
  CHECK(axis.weights() == Vector{{0.5, 1.0, 0.5}});
  const DensityGrid g = gaussian_grid(GridAxis{-15.0, 17.0, 3201}, 1.0, 4.0);
  CHECK(g.integral() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.mean() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(g.variance() == doctest::Approx(4.0).epsilon(1e-4));
  CHECK(g.cdf_at(1.0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(g.cdf_at(-20.0) == 0.0);
  CHECK(g.cdf_at(20.0) == 1.0);
  CHECK(g.cdf()[g.axis.points - 1] == doctest::Approx(1.0));
  CHECK_THROWS_AS((GridAxis{1.0, 0.0, 10}.validate()), Error);
  CHECK_THROWS_AS(DensityGrid(axis, Vector::Zero(3)).normalize(), Error);
}

TEST_CASE("joint marginals recover the tabulated marginals") {
  const JointGrid j = bivariate(0.5, 401);
  const DensityGrid mx = j.marginal_x();
  for (Index i = 0; i < mx.axis.points; i += 20)
    CHECK(std::abs(mx.values[i] - normal_pdf(mx.axis.at(i), 0.0, 1.0)) < 1e-6);
}

TEST_CASE("bayes_posterior examples") {
  SUBCASE("independent joint") {
    const GridAxis axis{-8.0, 8.0, 301};
    const JointGrid j = JointGrid::tabulate(axis, axis, [](double x, double y) {
      return normal_pdf(x, 1.0, 2.0) * normal_pdf(y, 0.0, 1.0);
    });
    const DensityGrid post = bayes_posterior(j, 0.7);
    const DensityGrid px = j.marginal_x().normalize();
    CHECK((post.values - px.values).cwiseAbs().maxCoeff() < 1e-9);
  }

  SUBCASE("bivariate Gaussian conditioning") {
    const JointGrid j = bivariate(0.5, 1025);
    const DensityGrid post = bayes_posterior(j, 1.0);
    CHECK(post.mean() == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(post.variance() == doctest::Approx(0.75).epsilon(1e-4));
    CHECK(ks_distance(post, gaussian_grid(post.axis, 0.5, 0.75)) < 1e-4);
  }

  SUBCASE("tight likelihood picks one mode") {
    BimodalToy toy;
    toy.noise_var = 0.01;
    toy.y_star = 2.0;
    const DensityGrid post = bayes_posterior(toy.joint(1025), toy.y_star);
    CHECK(1.0 - post.cdf_at(0.0) >= 0.99);
  }

  SUBCASE("observation outside the grid") {
    const JointGrid j = bivariate(0.5, 101);
    CHECK_THROWS_AS(bayes_posterior(j, 9.0), Error);
  }
}

TEST_CASE("bimodal toy posterior moments") {
  // Closed-form mixture posterior: components N((m + y*)/2, 1/8) with weights
  // proportional to N(y*; m, 1/2).
  const BimodalToy toy;
  const DensityGrid post = bayes_posterior(toy.joint(2048), toy.y_star);
  CHECK(post.integral() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(post.mean() == doctest::Approx(1.7499877116507956).epsilon(1e-5));
  CHECK(post.variance() == doctest::Approx(0.12502457654740562).epsilon(1e-4));
  CHECK(toy.gain() == doctest::Approx(4.25 / 4.5));
}

TEST_CASE("enkf_limit_pdf examples") {
  SUBCASE("Gaussian joint with its exact gain equals the posterior") {
    const JointGrid j = bivariate(0.5, 1025);
    const double k = joint_gain(j);
    CHECK(k == doctest::Approx(0.5).epsilon(1e-6));
    const DensityGrid limit = enkf_limit_pdf(j, k, 1.0);
    const DensityGrid post = bayes_posterior(j, 1.0);
    CHECK((limit.values - post.values).cwiseAbs().maxCoeff() < 1e-3);
  }

  SUBCASE("zero gain gives the prior marginal") {
    const JointGrid j = bivariate(0.5, 513);
    const DensityGrid limit = enkf_limit_pdf(j, 0.0, 1.0);
    const DensityGrid px = j.marginal_x().normalize();
    CHECK((limit.values - px.values).cwiseAbs().maxCoeff() < 1e-9);
  }

  SUBCASE("bimodal toy is biased") {
    const BimodalToy toy;
    const JointGrid j = toy.joint(1024);
    const DensityGrid limit = enkf_limit_pdf(j, toy.gain(), toy.y_star);
    CHECK(limit.integral() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(ks_distance(limit, bayes_posterior(j, toy.y_star)) > 0.05);
    // Mean of the shifted mixture: E[X] + K (y* - E[Y]).
    CHECK(limit.mean() == doctest::Approx(1.4166666666666665).epsilon(1e-4));
  }
}

TEST_CASE("tenkf_limit_pdf bridges EnKF and the posterior") {
  const BimodalToy toy;
  const JointGrid j = toy.joint(1024);
  const double k = toy.gain();
  const DensityGrid enkf = enkf_limit_pdf(j, k, toy.y_star);
  const DensityGrid post = bayes_posterior(j, toy.y_star);

  CHECK(ks_distance(tenkf_limit_pdf(j, k, toy.y_star, 1e9), enkf) < 1e-6);
  const double small = ks_distance(tenkf_limit_pdf(j, k, toy.y_star, 1e-4), post);
  CHECK(small < 0.02);

  const double large = ks_distance(enkf, post);
  const double mid = ks_distance(tenkf_limit_pdf(j, k, toy.y_star, 0.3), post);
  CHECK(mid > small);
  CHECK(mid < large);

  double prev = 1.0;
  for (double lambda : {10.0, 3.0, 1.0, 0.3, 0.1, 0.03, 0.01}) {
    const DensityGrid t = tenkf_limit_pdf(j, k, toy.y_star, lambda);
    CHECK(t.integral() == doctest::Approx(1.0).epsilon(1e-6));
    const double ks = ks_distance(t, post);
    CHECK(ks <= prev);
    prev = ks;
  }
}

TEST_CASE("kalman_filter_exact examples") {
  const auto model = [](double r) {
    return linear_gaussian_model(Matrix::Identity(1, 1), Matrix::Zero(1, 1), Matrix::Identity(1, 1),
                                 Matrix::Constant(1, 1, r));
  };
  const Gaussian prior{Vector{{1.0}}, Matrix::Constant(1, 1, 2.0)};

  const Gaussian vague = kalman_filter_exact(model(1e12), prior, Vector{{5.0}});
  CHECK(vague.mean[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(vague.cov(0, 0) == doctest::Approx(2.0).epsilon(1e-6));

  const Gaussian half = kalman_filter_exact(model(2.0), prior, Vector{{5.0}});
  CHECK(half.mean[0] == doctest::Approx(3.0));
  CHECK(half.cov(0, 0) == doctest::Approx(1.0));

  const Gaussian sharp = kalman_filter_exact(model(1e-12), prior, Vector{{5.0}});
  CHECK(sharp.mean[0] == doctest::Approx(5.0).epsilon(1e-9));

  const auto lg = linear_gaussian_model(Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 0.1),
                                        Matrix::Identity(1, 1), Matrix::Constant(1, 1, 1.0));
  const Gaussian f = kalman_forecast(lg, prior);
  CHECK(f.mean[0] == doctest::Approx(0.5));
  CHECK(f.cov(0, 0) == doctest::Approx(0.6));

  const auto singular = linear_gaussian_model(Matrix::Identity(1, 1), Matrix::Zero(1, 1), Matrix::Zero(1, 1),
                                              Matrix::Zero(1, 1));
  CHECK_THROWS(kalman_filter_exact(singular, prior, Vector{{0.0}}));
}

TEST_CASE("kernel density tools") {
  CHECK(silverman_bandwidth({-1.0, 0.0, 1.0, 2.0}) > 0.0);

  Rng rng(3);
  const GridAxis axis{-8.0, 8.0, 1025};
  const DensityGrid prior = gaussian_grid(axis, 0.0, 1.0);
  const std::vector<double> draws = sample_grid(prior, 100000, rng);
  const DensityGrid kde = kde_on_grid(draws, axis);
  CHECK(kde.integral() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(ks_distance(WeightedSample(draws), prior) < 0.01);
  CHECK(ks_distance(kde, prior) < 0.02);
}

TEST_CASE("prior_propagate_grid examples") {
  Rng rng(4);
  const GridAxis axis{-8.0, 8.0, 1025};
  const DensityGrid prior = gaussian_grid(axis, 0.0, 1.0);

  const DensityGrid same = prior_propagate_grid(prior, [](double x, Rng&) { return x; }, 100000, rng, axis);
  CHECK(ks_distance(same, prior) < 0.02);

  const DensityGrid shifted = prior_propagate_grid(prior, [](double x, Rng&) { return x + 3.0; }, 100000, rng);
  CHECK(shifted.mean() == doctest::Approx(3.0).epsilon(0.01));
  CHECK(ks_distance(shifted, gaussian_grid(shifted.axis, 3.0, 1.0)) < 0.02);

  // a x + N(0, q): N(0, a^2 + q).
  const DensityGrid linear = prior_propagate_grid(
      prior,
      [](double x, Rng& r) {
        std::normal_distribution<double> noise(0.0, std::sqrt(0.5));
        return 0.8 * x + noise(r);
      },
      100000, rng);
  CHECK(ks_distance(linear, gaussian_grid(linear.axis, 0.0, 0.64 + 0.5)) < 0.02);
}

TEST_CASE("bimodal toy sampling") {
  const BimodalToy toy;
  Rng rng(10);
  const auto [x, y] = toy.sample(100000, rng);
  CHECK(x.cols() == 100000);
  const double mx = x.mean();
  const double vx = (x.array() - mx).square().mean();
  const double vy = (y.array() - y.mean()).square().mean();
  CHECK(std::abs(mx) < 4.0 * std::sqrt(toy.x_var() / 1e5));
  CHECK(vx == doctest::Approx(toy.x_var()).epsilon(0.02));
  CHECK(vy == doctest::Approx(toy.y_var()).epsilon(0.02));
  CHECK(ks_distance(WeightedSample(row_sample(x, 0)), toy.joint(512).marginal_x().normalize()) < 0.01);
}
