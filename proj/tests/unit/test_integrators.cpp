#include <doctest.h>

#include "tenkf/integrators.hpp"

#include <cmath>

using namespace tenkf;

namespace {

FunctionModel linear(double a, double sigma) {
  return FunctionModel(
      1, [a](const Eigen::Ref<const Vector>& x, double, Eigen::Ref<Vector> out) { out = a * x; }, sigma);
}

FunctionModel constant_drift(double c, double sigma) {
  return FunctionModel(
      1, [c](const Eigen::Ref<const Vector>&, double, Eigen::Ref<Vector> out) { out.setConstant(c); }, sigma);
}

struct Moments {
  double mean, var;
};

// Exact moments after `steps` applications of x -> c x + d zeta.
Moments affine_recursion(double c, double d, double m0, double v0, long steps) {
  double m = m0, v = v0;
  for (long k = 0; k < steps; ++k) {
    m = c * m;
    v = c * c * v + d * d;
  }
  return {m, v};
}

}  // namespace

TEST_CASE("heun_sde_step examples") {
  Rng rng(1);
  const Vector x{{1.7}};
  CHECK(heun_sde_step(constant_drift(0.0, 0.0), x, 0.0, 0.1, rng) == x);

  const double a = -0.8, dt = 0.05;
  const Vector y = heun_sde_step(linear(a, 0.0), x, 0.0, dt, rng);
  CHECK(y[0] == doctest::Approx(1.7 * (1.0 + a * dt + a * a * dt * dt / 2.0)).epsilon(1e-14));

  const auto brownian = constant_drift(0.0, 1.0);
  const int n = 100000;
  const double h = 0.01;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double inc = heun_sde_step(brownian, Vector::Zero(1), 0.0, h, rng)[0];
    s += inc;
    ss += inc * inc;
  }
  const double var = (ss - s * s / n) / (n - 1);
  CHECK(std::abs(var - h) <= 3.0 * h * std::sqrt(2.0 / n));
}

TEST_CASE("predictor and corrector share one noise draw") {
  const double sigma = 0.3, dt = 0.04, a = -1.5;
  const Vector zeta{{0.9}};
  const Vector x{{2.0}};
  const double pred = 2.0 + dt * a * 2.0 + sigma * std::sqrt(dt) * 0.9;
  const double expect = 2.0 + 0.5 * dt * (a * 2.0 + a * pred) + sigma * std::sqrt(dt) * 0.9;
  CHECK(heun_sde_step(linear(a, sigma), x, 0.0, dt, zeta)[0] == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("integrate basics") {
  Rng rng(2);
  IntegratorConfig cfg;
  const Vector x0{{3.0}};
  CHECK(integrate(linear(1.0, 0.1), x0, 1.0, 1.0, cfg, rng) == x0);

  // A step that does not divide the interval: the final partial step lands on t1.
  cfg.scheme = Scheme::Rk4;
  cfg.dt = 0.3;
  CHECK(integrate(constant_drift(2.0, 0.0), x0, 0.0, 1.0, cfg, rng)[0] == doctest::Approx(5.0).epsilon(1e-14));

  CHECK_THROWS_AS(integrate(linear(1.0, 0.0), x0, 1.0, 0.0, cfg, rng), Error);
  CHECK_THROWS_AS(integrate(linear(1.0, 0.1), x0, 0.0, 1.0, cfg, rng), Error);
  cfg.dt = 0.0;
  CHECK_THROWS_AS(integrate(linear(1.0, 0.0), x0, 0.0, 1.0, cfg, rng), Error);
}

TEST_CASE("RK45 reproduces the exponential") {
  IntegratorConfig cfg;
  cfg.scheme = Scheme::Rk45Adaptive;
  cfg.rtol = 1e-8;
  cfg.atol = 1e-12;
  AdaptiveStats stats;
  const Vector x = integrate_rk45(linear(1.0, 0.0), Vector{{1.0}}, 0.0, 1.0, cfg, &stats);
  CHECK(std::abs(x[0] - std::exp(1.0)) < 1e-6);
  CHECK(stats.accepted > 0);
}

TEST_CASE("RK45 result does not depend on the first step guess") {
  const FunctionModel rotation(
      2,
      [](const Eigen::Ref<const Vector>& x, double, Eigen::Ref<Vector> out) {
        out[0] = -x[1];
        out[1] = x[0];
      },
      0.0);
  IntegratorConfig cfg;
  cfg.scheme = Scheme::Rk45Adaptive;
  cfg.rtol = 1e-9;
  cfg.atol = 1e-12;
  const Vector x0{{1.0, 0.0}};
  Vector ref;
  for (double guess : {1e-5, 1e-2, 0.5}) {
    cfg.dt = guess;
    const Vector x = integrate_rk45(rotation, x0, 0.0, 2.0, cfg);
    CHECK(std::abs(x[0] - std::cos(2.0)) < 1e-7);
    if (ref.size() == 0)
      ref = x;
    else
      CHECK((x - ref).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("RK4 and RK45 agree on Lorenz-63") {
  Lorenz63Params p;
  p.sigma = 0.0;
  const Lorenz63 model(p);
  Rng rng(0);
  IntegratorConfig adaptive;
  adaptive.scheme = Scheme::Rk45Adaptive;
  adaptive.rtol = 1e-9;
  adaptive.atol = 1e-12;
  // Spin up onto the attractor first.
  const Vector x0 = integrate(model, Vector{{1.0, 1.0, 1.0}}, 0.0, 10.0, adaptive, rng);
  IntegratorConfig fixed;
  fixed.scheme = Scheme::Rk4;
  fixed.dt = 0.01;
  const Vector a = integrate(model, x0, 0.0, 1.0, fixed, rng);
  const Vector b = integrate(model, x0, 0.0, 1.0, adaptive, rng);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("RK45 reports a collapsing step") {
  // x' = x^2 from x = 1 blows up at t = 1.
  const FunctionModel blowup(
      1, [](const Eigen::Ref<const Vector>& x, double, Eigen::Ref<Vector> out) { out = x.cwiseProduct(x); }, 0.0);
  IntegratorConfig cfg;
  cfg.scheme = Scheme::Rk45Adaptive;
  cfg.min_step = 1e-10;
  CHECK_THROWS_AS(integrate_rk45(blowup, Vector{{1.0}}, 0.0, 2.0, cfg), IntegrationError);
}

TEST_CASE("stochastic Heun weak errors decay at least linearly") {
  // dX = a X dt + sigma dW. One Heun step is x -> c x + d zeta; read c and d off the
  // implementation and propagate the moments exactly, so no Monte Carlo noise enters.
  const double a = -1.0, sigma = 0.5, m0 = 1.0, v0 = 0.0, T = 1.0;
  const auto model = linear(a, sigma);
  const double exact_mean = m0 * std::exp(a * T);
  const double exact_var = v0 * std::exp(2 * a * T) + sigma * sigma * (std::exp(2 * a * T) - 1.0) / (2 * a);
  double prev_mean_err = 0.0, prev_var_err = 0.0;
  for (double dt : {0.04, 0.02, 0.01}) {
    const double c = heun_sde_step(model, Vector{{1.0}}, 0.0, dt, Vector{{0.0}})[0];
    const double d = heun_sde_step(model, Vector{{0.0}}, 0.0, dt, Vector{{1.0}})[0];
    const auto steps = std::lround(T / dt);
    const Moments mo = affine_recursion(c, d, m0, v0, steps);
    const double em = std::abs(mo.mean - exact_mean), ev = std::abs(mo.var - exact_var);
    if (prev_mean_err > 0.0) {
      CHECK(prev_mean_err / em >= 2.0);
      CHECK(prev_var_err / ev >= 2.0);
    }
    prev_mean_err = em;
    prev_var_err = ev;
  }
}

TEST_CASE("integrate uses the Heun step map") {
  // Sample moments of the full integrator match the exact moments of the step recursion.
  const double a = -1.0, sigma = 0.5, dt = 0.02;
  const auto model = linear(a, sigma);
  IntegratorConfig cfg;
  cfg.dt = dt;
  const double c = heun_sde_step(model, Vector{{1.0}}, 0.0, dt, Vector{{0.0}})[0];
  const double d = heun_sde_step(model, Vector{{0.0}}, 0.0, dt, Vector{{1.0}})[0];
  const Moments mo = affine_recursion(c, d, 1.0, 0.0, 50);
  const int n = 20000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    Rng rng = StreamKey(3).child(static_cast<std::uint64_t>(i)).rng();
    const double x = integrate(model, Vector{{1.0}}, 0.0, 1.0, cfg, rng)[0];
    s += x;
    ss += x * x;
  }
  const double mean = s / n, var = (ss - s * s / n) / (n - 1);
  CHECK(std::abs(mean - mo.mean) < 4.0 * std::sqrt(mo.var / n));
  CHECK(std::abs(var - mo.var) < 4.0 * mo.var * std::sqrt(2.0 / n));
}

TEST_CASE("fixed-seed SDE integration is bit-reproducible") {
  Lorenz63Params p;
  const Lorenz63 model(p);
  IntegratorConfig cfg;
  Rng a(77), b(77);
  const Vector x0{{1.0, 2.0, 20.0}};
  CHECK(integrate(model, x0, 0.0, 1.0, cfg, a) == integrate(model, x0, 0.0, 1.0, cfg, b));

  const Propagator prop = make_propagator(std::make_shared<Lorenz63>(p), cfg);
  Vector u = x0, v = x0;
  Rng c(5), d(5);
  prop(u, 0.0, 0.5, c);
  prop(v, 0.0, 0.5, d);
  CHECK(u == v);
}
