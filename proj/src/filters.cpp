#include "tenkf/filters.hpp"

#include "tenkf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tenkf {

void TrimConfig::validate(Index members) const {
  if (!(lambda > 0.0)) throw Error("trim: lambda must be positive");
  if (!(lambda_min > 0.0) || !(lambda_min < lambda_max)) throw Error("trim: need 0 < lambda_min < lambda_max");
  if (!(ne_tolerance > 0.0)) throw Error("trim: ne_tolerance must be positive");
  if (max_bisect_iters < 1) throw Error("trim: max_bisect_iters must be at least 1");
  if (target_ne && (!(*target_ne >= 1.0) || *target_ne > static_cast<double>(members)))
    throw Error("trim: target effective size must lie in [1, n]");
}

void AugmentConfig::validate() const {
  if (!(d_max > 0.0)) throw Error("augment: d_max must be positive");
  if (!(r_max >= 1.0)) throw Error("augment: r_max must be at least 1");
  if (!(sigma_p >= 0.0)) throw Error("augment: sigma_p must be non-negative");
}

JointEnsemble forecast(const Matrix& prior, const Propagator& propagate, const MeasModel& meas, double t0,
                       double horizon, const StreamKey& key, int threads) {
  const Index n = prior.cols();
  if (prior.rows() != meas.state_dim()) throw Error("forecast: prior dimension does not match the measurement model");
  JointEnsemble out;
  out.states = prior;
  out.observations.resize(meas.obs_dim(), n);
  parallel_for(n, threads, [&](long i) {
    Rng rng = key.child(static_cast<std::uint64_t>(i)).rng();
    try {
      Vector x = prior.col(i);
      if (horizon > 0.0) propagate(x, t0, t0 + horizon, rng);
      if (!x.allFinite()) throw Error("non-finite state");
      out.observations.col(i) = meas.observe(x, rng);
      out.states.col(i) = x;
    } catch (const std::exception& e) {
      throw Error("forecast member " + std::to_string(i) + ": " + e.what());
    }
  });
  return out;
}

namespace {

Matrix innovations(const JointEnsemble& j, const Vector& y_star) {
  if (y_star.size() != j.obs_dim()) throw Error("update: observation dimension mismatch");
  return (-j.observations).colwise() + y_star;
}

Matrix shifted(const Matrix& states, const Matrix& innov, const KalmanGain* gain) {
  if (!gain) return states;
  return states + gain->gain * innov;
}

}  // namespace

FilterState enkf_update(const JointEnsemble& j, const Vector& y_star) {
  j.check_aligned();
  if (j.size() < 2) throw Error("enkf_update: need at least two members");
  const Matrix innov = innovations(j, y_star);
  FilterState out;
  // Zero innovation for every member leaves the states untouched whatever the gain.
  if (innov.isZero(0.0)) {
    out.posterior = Ensemble(j.states);
  } else {
    const KalmanGain gain = kalman_gain(j);
    out.posterior = Ensemble(shifted(j.states, innov, &gain));
  }
  out.diagnostics.effective_size = static_cast<double>(j.size());
  out.diagnostics.forecast_members = j.size();
  out.diagnostics.weight_entropy = std::log(static_cast<double>(j.size()));
  return out;
}

Vector trim_distance(const Matrix& Y, const Vector& y_star, Distance kind, const Vector& scale, Index* skipped) {
  if (Y.rows() != y_star.size()) throw Error("trim_distance: observation dimension mismatch");
  const Matrix diff = (Y.colwise() - y_star).cwiseAbs();
  if (kind == Distance::MaxAbs) {
    if (skipped) *skipped = 0;
    return diff.colwise().maxCoeff().transpose();
  }
  if (scale.size() != Y.rows()) throw Error("trim_distance: scale dimension mismatch");
  Vector inv(scale.size());
  Index skip = 0;
  for (Index r = 0; r < scale.size(); ++r) {
    if (scale[r] > 0.0 && std::isfinite(scale[r])) {
      inv[r] = 1.0 / scale[r];
    } else {
      inv[r] = 0.0;
      ++skip;
    }
  }
  if (skipped) *skipped = skip;
  return (inv.asDiagonal() * diff).colwise().sum().transpose();
}

WeightVector trim_weights(const Vector& d, double lambda) {
  if (!(lambda > 0.0)) throw Error("trim_weights: lambda must be positive");
  return WeightVector::from_log(-d / lambda);
}

LambdaSearch adapt_lambda(const Vector& d, double target_ne, const TrimConfig& cfg) {
  LambdaSearch out;
  const Index n = d.size();
  if (n < 1) throw Error("adapt_lambda: no distances");
  if (!(target_ne >= 1.0) || target_ne > static_cast<double>(n))
    throw Error("adapt_lambda: target effective size must lie in [1, n]");

  auto evaluate = [&](double lambda) {
    out.lambda = lambda;
    out.weights = trim_weights(d, out.lambda);
    out.effective_size = effective_size(out.weights);
    return std::abs(out.effective_size - target_ne) / target_ne <= cfg.ne_tolerance;
  };

  if (d.maxCoeff() - d.minCoeff() == 0.0) {
    out.lambda = cfg.lambda_max;
    out.weights = WeightVector::uniform(n);
    out.effective_size = static_cast<double>(n);
    out.flag = "no trim possible";
    return out;
  }

  double lo = std::log(cfg.lambda_min);
  double hi = std::log(cfg.lambda_max);
  if (evaluate(cfg.lambda_max)) return out;
  if (out.effective_size < target_ne) {
    out.flag = "target above reachable range";
    return out;
  }
  if (evaluate(cfg.lambda_min)) return out;
  if (out.effective_size > target_ne) {
    out.flag = "target below reachable range";
    return out;
  }
  // n_e is non-decreasing in lambda: too many effective members -> shrink lambda.
  for (int it = 1; it <= cfg.max_bisect_iters; ++it) {
    const double mid = 0.5 * (lo + hi);
    out.iterations = it;
    if (evaluate(std::exp(mid))) return out;
    if (out.effective_size > target_ne)
      hi = mid;
    else
      lo = mid;
  }
  out.flag = "bisection limit reached";
  return out;
}

double weight_entropy(const WeightVector& w) {
  double h = 0.0;
  for (Index i = 0; i < w.size(); ++i)
    if (w[i] > 0.0) h -= w[i] * std::log(w[i]);
  return h;
}

FilterState tenkf_update(const JointEnsemble& j, const Vector& y_star, const TrimConfig& cfg, Rng& rng,
                         Index out_members) {
  j.check_aligned();
  const Index n = j.size();
  if (n < 2) throw Error("tenkf_update: need at least two members");
  const Index n_out = out_members < 0 ? n : out_members;
  const Matrix innov = innovations(j, y_star);
  const bool zero_innovation = innov.isZero(0.0);

  FilterState out;
  auto& diag = out.diagnostics;
  diag.forecast_members = n;

  // Gain from the untrimmed forecast ensemble, before any weighting.
  std::optional<KalmanGain> gain;
  if (!zero_innovation && !cfg.trimmed_gain) gain = kalman_gain(j);

  Index skipped = 0;
  const Vector scale = cfg.distance == Distance::NormalizedL1 ? sample_std(j.observations) : Vector();
  const Vector d = trim_distance(j.observations, y_star, cfg.distance, scale, &skipped);
  if (skipped > 0) diag.flag = "skipped " + std::to_string(skipped) + " zero-variance observation dimension(s)";

  WeightVector w = WeightVector::uniform(n);
  if (cfg.target_ne) {
    if (*cfg.target_ne > static_cast<double>(n)) throw Error("tenkf_update: target effective size exceeds n");
    LambdaSearch search = adapt_lambda(d, *cfg.target_ne, cfg);
    w = search.weights;
    diag.lambda = search.lambda;
    diag.search_iterations = search.iterations;
    if (!search.flag.empty()) diag.flag += (diag.flag.empty() ? "" : "; ") + search.flag;
  } else {
    w = trim_weights(d, cfg.lambda);
    diag.lambda = cfg.lambda;
  }
  diag.effective_size = effective_size(w);
  diag.weight_entropy = weight_entropy(w);

  std::vector<Index> chosen;
  const JointEnsemble trimmed = bootstrap_resample(j, w, rng, n_out, cfg.resampling, &chosen);
  diag.resample_digest = index_digest(chosen);

  if (!zero_innovation && cfg.trimmed_gain) gain = kalman_gain(trimmed);
  out.posterior = Ensemble(shifted(trimmed.states, innovations(trimmed, y_star), gain ? &*gain : nullptr));
  return out;
}

Index augmented_size(Index n, Index n_within, double r_max) {
  if (n < 1) throw Error("augmented_size: need at least one member");
  if (!(r_max >= 1.0)) throw Error("augmented_size: r_max must be at least 1");
  const auto cap = static_cast<Index>(std::floor(static_cast<double>(n) * r_max));
  if (n_within <= 0) return cap;
  return std::min(cap, (n * n) / n_within);
}

AugmentResult augment_forecast(const JointEnsemble& j, const Matrix& prior, const Vector& y_star,
                               const AugmentConfig& aug, const ForecastPipeline& pipeline, Rng& rng,
                               const StreamKey& forecast_key) {
  aug.validate();
  j.check_aligned();
  const Index n = j.size();
  if (n < 1) throw Error("augment_forecast: empty forecast ensemble");
  if (prior.cols() < 1 || prior.rows() != j.state_dim())
    throw Error("augment_forecast: prior ensemble does not match the forecast states");

  const Vector scale =
      aug.distance == Distance::NormalizedL1 && n >= 2 ? sample_std(j.observations) : Vector::Ones(j.obs_dim());
  const Vector d = trim_distance(j.observations, y_star, aug.distance, scale);

  AugmentResult out;
  out.members_within = (d.array() < aug.d_max).count();
  out.augmented_size = augmented_size(n, out.members_within, aug.r_max);
  if (out.members_within >= n || out.augmented_size <= n) {
    out.ensemble = j;
    out.augmented_size = n;
    return out;
  }

  const Index extra = out.augmented_size - n;
  Matrix initial(prior.rows(), extra);
  std::uniform_int_distribution<Index> pick(0, prior.cols() - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index k = 0; k < extra; ++k) {
    const Index src = pick(rng);
    for (Index r = 0; r < prior.rows(); ++r) initial(r, k) = prior(r, src) + aug.sigma_p * normal(rng);
  }
  const JointEnsemble added = pipeline(initial, forecast_key);
  if (added.size() != extra || added.state_dim() != j.state_dim() || added.obs_dim() != j.obs_dim())
    throw Error("augment_forecast: pipeline returned a mismatched ensemble");

  out.ensemble.states.resize(j.state_dim(), out.augmented_size);
  out.ensemble.observations.resize(j.obs_dim(), out.augmented_size);
  out.ensemble.states << j.states, added.states;
  out.ensemble.observations << j.observations, added.observations;
  return out;
}

FilterState pf_update(const JointEnsemble& j, const Vector& y_star, const MeasModel& meas, Rng& rng,
                      Index out_members) {
  j.check_aligned();
  const Index n = j.size();
  if (n < 1) throw Error("pf_update: empty ensemble");
  Vector log_w(n);
  for (Index i = 0; i < n; ++i) log_w[i] = meas.log_likelihood(j.states.col(i), y_star);

  std::optional<WeightVector> w;
  try {
    w = WeightVector::from_log(log_w);
  } catch (const Error& e) {
    throw Error(std::string("pf_update: filter degeneracy (") + e.what() + ")");
  }

  FilterState out;
  auto& diag = out.diagnostics;
  diag.forecast_members = n;
  diag.effective_size = effective_size(*w);
  diag.weight_entropy = weight_entropy(*w);
  std::vector<Index> chosen;
  const JointEnsemble resampled = bootstrap_resample(j, *w, rng, out_members < 0 ? n : out_members,
                                                     ResampleScheme::Multinomial, &chosen);
  diag.resample_digest = index_digest(chosen);
  out.posterior = Ensemble(resampled.states);
  return out;
}

}  // namespace tenkf
