#pragma once

#include "tenkf/core.hpp"
#include "tenkf/ensemble.hpp"
#include "tenkf/integrators.hpp"
#include "tenkf/models.hpp"
#include "tenkf/rng.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tenkf {

enum class Distance {
  NormalizedL1,  ///< sum_j |y_j - y*_j| / sigma_j, sigma_j the forecast sample std
  MaxAbs,        ///< max_j |y_j - y*_j|
};

/// Trimming function t(y) = exp(-d(y, y*) / lambda) and its tuning.
struct TrimConfig {
  Distance distance = Distance::NormalizedL1;
  /// Fixed trimming scale, used when target_ne is unset.
  double lambda = 1.0;
  /// Target effective ensemble size; when set, lambda is searched for.
  std::optional<double> target_ne;
  double lambda_min = 1e-6;
  double lambda_max = 1e6;
  /// Relative tolerance on |n_e - target| / target.
  double ne_tolerance = 0.05;
  int max_bisect_iters = 60;
  /// Recompute the gain from the resampled ensemble instead of the forecast ensemble.
  bool trimmed_gain = false;
  ResampleScheme resampling = ResampleScheme::Multinomial;

  void validate(Index members) const;
};

/// Forecast augmentation when too few members land near the observation.
struct AugmentConfig {
  double d_max = 3.0;
  double r_max = 3.0;
  /// Standard deviation of the perturbation applied to re-drawn initial states.
  double sigma_p = 0.4;
  Distance distance = Distance::MaxAbs;

  void validate() const;
};

struct FilterDiagnostics {
  double lambda = 0.0;           ///< 0 when no trimming was applied
  double effective_size = 0.0;   ///< n_e of the weights used for resampling
  Index forecast_members = 0;    ///< members entering the update (n_aug when augmented)
  Index members_within = -1;     ///< n_d, -1 when augmentation is off
  double weight_entropy = 0.0;
  std::uint64_t resample_digest = 0;
  int search_iterations = 0;
  std::string flag;              ///< empty, or a degenerate-search / skipped-dimension note
};

struct FilterState {
  Ensemble posterior;
  FilterDiagnostics diagnostics;
};

/// Simulates every member over [t0, t0 + horizon] and observes it.
/// Member i draws all of its noise from `key.child(i)`.
JointEnsemble forecast(const Matrix& prior, const Propagator& propagate, const MeasModel& meas, double t0,
                       double horizon, const StreamKey& key, int threads = 1);

/// X_i + K (y* - Y_i) with K from the sample covariances of `j`.
FilterState enkf_update(const JointEnsemble& j, const Vector& y_star);

/// Distance of every observed-forecast column to y*. For NormalizedL1, dimensions
/// with non-positive scale are skipped and counted in `skipped`.
Vector trim_distance(const Matrix& Y, const Vector& y_star, Distance kind, const Vector& scale,
                     Index* skipped = nullptr);

/// w_i proportional to exp(-d_i / lambda), evaluated in log space.
WeightVector trim_weights(const Vector& d, double lambda);

struct LambdaSearch {
  double lambda = 0.0;
  WeightVector weights = WeightVector::uniform(1);
  double effective_size = 0.0;
  int iterations = 0;
  std::string flag;  ///< "", "no trim possible", "target above reachable range", "target below reachable range"
};

/// Bisection on log(lambda) over [lambda_min, lambda_max] until n_e matches the target.
LambdaSearch adapt_lambda(const Vector& d, double target_ne, const TrimConfig& cfg);

/// Trimmed update: gain from the forecast ensemble, trimming weights, bootstrap
/// resample to `out_members` (default: input size), then the Kalman shift.
FilterState tenkf_update(const JointEnsemble& j, const Vector& y_star, const TrimConfig& cfg, Rng& rng,
                         Index out_members = -1);

/// Maps initial states to forecast members using the given stream.
using ForecastPipeline = std::function<JointEnsemble(const Matrix& initial_states, const StreamKey& key)>;

/// n_aug = floor(n * min(r_max, n / n_d)); n_d = 0 maps to the r_max cap.
Index augmented_size(Index n, Index n_within, double r_max);

struct AugmentResult {
  JointEnsemble ensemble;
  Index members_within = 0;  ///< n_d
  Index augmented_size = 0;  ///< members after augmentation
};

/// Adds perturbed re-forecasts of uniformly drawn prior members when fewer than
/// n forecast members lie within d_max of y*.
AugmentResult augment_forecast(const JointEnsemble& j, const Matrix& prior, const Vector& y_star,
                               const AugmentConfig& aug, const ForecastPipeline& pipeline, Rng& rng,
                               const StreamKey& forecast_key);

/// Bootstrap particle filter: likelihood weights, resampling, no shift.
FilterState pf_update(const JointEnsemble& j, const Vector& y_star, const MeasModel& meas, Rng& rng,
                      Index out_members = -1);

/// Shannon entropy of the weights (nats).
double weight_entropy(const WeightVector& w);

}  // namespace tenkf
