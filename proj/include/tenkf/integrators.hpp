#pragma once

#include "tenkf/core.hpp"
#include "tenkf/models.hpp"
#include "tenkf/rng.hpp"

#include <functional>
#include <limits>
#include <memory>

namespace tenkf {

enum class Scheme { StochasticHeun, Rk4, Rk45Adaptive };

struct IntegratorConfig {
  Scheme scheme = Scheme::StochasticHeun;
  /// Fixed step, or the initial step guess for the adaptive scheme.
  double dt = 0.01;
  double rtol = 1e-6;
  double atol = 1e-9;
  double max_step = std::numeric_limits<double>::infinity();
  double min_step = 1e-12;

  void validate() const;
};

/// Raised when the drift turns non-finite or the adaptive step collapses.
class IntegrationError : public Error {
public:
  using Error::Error;
};

/// One stochastic Heun step using the given standard-normal draw `zeta`.
/// Predictor and corrector share the increment sigma * sqrt(dt) * zeta.
Vector heun_sde_step(const DynModel& model, const Vector& x, double t, double dt, const Vector& zeta);

/// One stochastic Heun step drawing zeta from `rng`.
Vector heun_sde_step(const DynModel& model, const Vector& x, double t, double dt, Rng& rng);

/// Classical fourth-order Runge-Kutta step of the drift.
Vector rk4_step(const DynModel& model, const Vector& x, double t, double dt);

/// State at t1. Fixed-step schemes land exactly on t1 with a final partial step.
Vector integrate(const DynModel& model, const Vector& x0, double t0, double t1, const IntegratorConfig& cfg,
                 Rng& rng);

struct AdaptiveStats {
  long accepted = 0;
  long rejected = 0;
};

/// Dormand-Prince 5(4) with a PI step-size controller; cfg.dt is the first trial step.
Vector integrate_rk45(const DynModel& model, const Vector& x0, double t0, double t1, const IntegratorConfig& cfg,
                      AdaptiveStats* stats = nullptr);

/// Advances a state in place from t0 to t1, drawing noise from `rng`.
using Propagator = std::function<void(Eigen::Ref<Vector> x, double t0, double t1, Rng& rng)>;

Propagator make_propagator(std::shared_ptr<const DynModel> model, IntegratorConfig cfg);

}  // namespace tenkf
