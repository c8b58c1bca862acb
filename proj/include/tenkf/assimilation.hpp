#pragma once

#include "tenkf/filters.hpp"
#include "tenkf/metrics.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tenkf {

enum class FilterKind { EnKF, TEnKF, PF };

const char* to_string(FilterKind kind);

struct FilterSpec {
  FilterKind kind = FilterKind::EnKF;
  TrimConfig trim;                       // TEnKF only
  std::optional<AugmentConfig> augment;  // TEnKF only
};

/// Truth state at t = 0, the observation taken from it, and the prior centre the
/// ensemble is drawn around.
struct TwinInitial {
  Vector truth;
  Vector observation;
  Vector prior_mean;
};

/// Synthetic twin experiment: one model drives both the truth and the forecasts.
struct TwinSetup {
  std::shared_ptr<const DynModel> model;
  std::shared_ptr<const MeasModel> meas;
  IntegratorConfig integrator;
  /// Optional replacement for the integrator (e.g. a discrete-time transition).
  Propagator propagator;
  double dt_obs = 1.0;
  double t_final = 1.0;
  std::function<TwinInitial(Rng&)> draw_initial;
  std::function<Matrix(const TwinInitial&, Index members, Rng&)> draw_ensemble;

  /// Number of observation times t_k = k dt_obs <= t_final.
  int steps() const;
};

struct Twin {
  TwinInitial initial;
  std::vector<double> times;
  std::vector<Vector> truth;
  std::vector<Vector> observations;
};

/// Truth trajectory and observations from the replicate's Truth stream.
Twin simulate_twin(const TwinSetup& setup, const StreamKey& replicate);

/// Initial ensemble from the replicate's InitialEnsemble stream (shared by all filters).
Matrix initial_ensemble(const TwinSetup& setup, const Twin& twin, Index members, const StreamKey& replicate);

struct StepRecord {
  double time = 0.0;
  double rmse = 0.0;
  double mean_rmse = 0.0;
  FilterDiagnostics diagnostics;
};

struct AssimilationResult {
  std::vector<StepRecord> steps;
  Matrix posterior;
  RmseSeries rmse;
  RmseSeries mean_rmse;
};

/// Called after every update with the zero-based step index and the posterior members.
using StepObserver = std::function<void(std::size_t step, const Matrix& posterior, const StepRecord& record)>;

/// Forecast / (augment) / update cycle over every observation time. Forecast noise
/// for step k and member i comes from replicate/Forecast/k/i, so filters compared on
/// the same replicate share their random numbers wherever their ensembles agree.
AssimilationResult run_assimilation(const TwinSetup& setup, const Twin& twin, const Matrix& initial,
                                    const FilterSpec& filter, const StreamKey& replicate, int threads = 1,
                                    const StepObserver& observer = {});

}  // namespace tenkf
