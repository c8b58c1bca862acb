#include "tenkf/integrators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tenkf {

void IntegratorConfig::validate() const {
  if (!(dt > 0.0)) throw Error("integrator: dt must be positive");
  if (scheme == Scheme::Rk45Adaptive) {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw Error("integrator: rtol and atol must be positive");
    if (!(min_step > 0.0) || !(max_step >= min_step)) throw Error("integrator: need 0 < min_step <= max_step");
  }
}

namespace {

void check_finite(const Vector& v, double t) {
  if (!v.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite drift at t = " << t;
    throw IntegrationError(msg.str());
  }
}

// Fixed-step loop; the last step is shortened to land on t1.
template <typename Step>
Vector fixed_steps(Vector x, double t0, double t1, double dt, Step&& step) {
  const double span = t1 - t0;
  if (span <= 0.0) return x;
  const auto full = static_cast<long>(std::floor(span / dt * (1.0 + 1e-12)));
  for (long k = 0; k < full; ++k) x = step(x, t0 + static_cast<double>(k) * dt, dt);
  const double done = static_cast<double>(full) * dt;
  const double rest = span - done;
  if (rest > 1e-12 * std::max(1.0, std::abs(t1))) x = step(x, t0 + done, rest);
  return x;
}

}  // namespace

Vector heun_sde_step(const DynModel& model, const Vector& x, double t, double dt, const Vector& zeta) {
  const double sigma = model.noise_intensity();
  Vector f0 = model.drift(x, t);
  check_finite(f0, t);
  Vector noise = (sigma * std::sqrt(dt)) * zeta;
  Vector predictor = x + dt * f0 + noise;
  Vector f1 = model.drift(predictor, t + dt);
  check_finite(f1, t + dt);
  return x + (0.5 * dt) * (f0 + f1) + noise;
}

Vector heun_sde_step(const DynModel& model, const Vector& x, double t, double dt, Rng& rng) {
  if (!(dt > 0.0)) throw Error("heun_sde_step: dt must be positive");
  Vector zeta(x.size());
  if (model.noise_intensity() > 0.0)
    fill_standard_normal(zeta, rng);
  else
    zeta.setZero();
  return heun_sde_step(model, x, t, dt, zeta);
}

Vector rk4_step(const DynModel& model, const Vector& x, double t, double dt) {
  const Vector k1 = model.drift(x, t);
  const Vector k2 = model.drift(x + 0.5 * dt * k1, t + 0.5 * dt);
  const Vector k3 = model.drift(x + 0.5 * dt * k2, t + 0.5 * dt);
  const Vector k4 = model.drift(x + dt * k3, t + dt);
  Vector out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  check_finite(out, t + dt);
  return out;
}

Vector integrate_rk45(const DynModel& model, const Vector& x0, double t0, double t1, const IntegratorConfig& cfg,
                      AdaptiveStats* stats) {
  // Dormand-Prince tableau
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;
  // PI controller
  constexpr double safety = 0.9, fac_min = 0.2, fac_max = 5.0, beta = 0.04, alpha = 0.2 - 0.75 * beta;

  Vector x = x0;
  if (t1 <= t0) return x;
  double t = t0;
  double h = std::min({cfg.dt, cfg.max_step, t1 - t0});
  double err_prev = 1e-4;
  bool last_rejected = false;

  const Index n = x.size();
  Vector k1 = model.drift(x, t), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), y(n), err(n);
  check_finite(k1, t);

  while (t < t1) {
    const double remaining = t1 - t;
    bool final_step = false;
    if (h >= remaining * (1.0 - 1e-12)) {
      h = remaining;
      final_step = true;
    }
    if (h < cfg.min_step && !final_step) {
      std::ostringstream msg;
      msg << "rk45: step size " << h << " fell below min_step " << cfg.min_step << " at t = " << t;
      throw IntegrationError(msg.str());
    }

    model.drift(x + h * a21 * k1, t + c2 * h, k2);
    model.drift(x + h * (a31 * k1 + a32 * k2), t + c3 * h, k3);
    model.drift(x + h * (a41 * k1 + a42 * k2 + a43 * k3), t + c4 * h, k4);
    model.drift(x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), t + c5 * h, k5);
    model.drift(x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), t + h, k6);
    y = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    model.drift(y, t + h, k7);

    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double norm = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double sc = cfg.atol + cfg.rtol * std::max(std::abs(x[i]), std::abs(y[i]));
      norm += (err[i] / sc) * (err[i] / sc);
    }
    norm = std::sqrt(norm / static_cast<double>(n));
    if (!std::isfinite(norm)) {
      if (h <= cfg.min_step) throw IntegrationError("rk45: non-finite drift");
      h *= fac_min;
      last_rejected = true;
      if (stats) ++stats->rejected;
      continue;
    }

    if (norm <= 1.0) {
      t = final_step ? t1 : t + h;
      x = y;
      k1 = k7;  // first-same-as-last
      double fac = norm == 0.0 ? fac_max : safety * std::pow(norm, -alpha) * std::pow(err_prev, beta);
      fac = std::clamp(fac, fac_min, fac_max);
      if (last_rejected) fac = std::min(fac, 1.0);
      err_prev = std::max(norm, 1e-4);
      h = std::min(h * fac, cfg.max_step);
      last_rejected = false;
      if (stats) ++stats->accepted;
    } else {
      h *= std::max(fac_min, safety * std::pow(norm, -alpha));
      last_rejected = true;
      if (stats) ++stats->rejected;
    }
  }
  return x;
}

Vector integrate(const DynModel& model, const Vector& x0, double t0, double t1, const IntegratorConfig& cfg,
                 Rng& rng) {
  cfg.validate();
  if (x0.size() != model.state_dim()) throw Error("integrate: state dimension mismatch");
  if (t1 < t0) throw Error("integrate: t1 < t0");
  if (cfg.scheme != Scheme::StochasticHeun && model.noise_intensity() > 0.0)
    throw Error("integrate: deterministic scheme requested for a model with sigma > 0");

  switch (cfg.scheme) {
    case Scheme::StochasticHeun: {
      const double sigma = model.noise_intensity();
      const Index n = x0.size();
      Vector x = x0, f0(n), f1(n), noise(n), pred(n);
      noise.setZero();
      auto step = [&](double t, double h) {
        model.drift(x, t, f0);
        check_finite(f0, t);
        if (sigma > 0.0) {
          fill_standard_normal(noise, rng);
          noise *= sigma * std::sqrt(h);
        }
        pred = x + h * f0 + noise;
        model.drift(pred, t + h, f1);
        check_finite(f1, t + h);
        x += (0.5 * h) * (f0 + f1) + noise;
      };
      const double span = t1 - t0;
      if (span <= 0.0) return x;
      const auto full = static_cast<long>(std::floor(span / cfg.dt * (1.0 + 1e-12)));
      for (long k = 0; k < full; ++k) step(t0 + static_cast<double>(k) * cfg.dt, cfg.dt);
      const double done = static_cast<double>(full) * cfg.dt;
      if (span - done > 1e-12 * std::max(1.0, std::abs(t1))) step(t0 + done, span - done);
      return x;
    }
    case Scheme::Rk4:
      return fixed_steps(x0, t0, t1, cfg.dt,
                         [&](const Vector& x, double t, double h) { return rk4_step(model, x, t, h); });
    case Scheme::Rk45Adaptive:
      return integrate_rk45(model, x0, t0, t1, cfg);
  }
  throw Error("integrate: unknown scheme");
}

Propagator make_propagator(std::shared_ptr<const DynModel> model, IntegratorConfig cfg) {
  cfg.validate();
  if (cfg.scheme != Scheme::StochasticHeun && model->noise_intensity() > 0.0)
    throw Error("integrator: deterministic scheme requested for a model with sigma > 0");
  return [model = std::move(model), cfg](Eigen::Ref<Vector> x, double t0, double t1, Rng& rng) {
    x = integrate(*model, Vector(x), t0, t1, cfg, rng);
  };
}

}  // namespace tenkf
