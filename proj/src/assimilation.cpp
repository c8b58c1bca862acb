#include "tenkf/assimilation.hpp"

#include <cmath>

namespace tenkf {

const char* to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::EnKF: return "EnKF";
    case FilterKind::TEnKF: return "TEnKF";
    case FilterKind::PF: return "PF";
  }
  return "?";
}

namespace {

Propagator propagator_for(const TwinSetup& setup) {
  if (setup.propagator) return setup.propagator;
  if (!setup.model) throw Error("twin: no model and no propagator");
  return make_propagator(setup.model, setup.integrator);
}

}  // namespace

int TwinSetup::steps() const {
  if (!(dt_obs > 0.0)) throw Error("twin: dt_obs must be positive");
  if (!(t_final >= 0.0)) throw Error("twin: t_final must be non-negative");
  return static_cast<int>(std::floor(t_final / dt_obs + 1e-9));
}

Twin simulate_twin(const TwinSetup& setup, const StreamKey& replicate) {
  Rng rng = (replicate / Stream::Truth).rng();
  const Propagator propagate = propagator_for(setup);
  Twin twin;
  twin.initial = setup.draw_initial(rng);
  Vector x = twin.initial.truth;
  const int steps = setup.steps();
  for (int k = 1; k <= steps; ++k) {
    const double t0 = (k - 1) * setup.dt_obs, t1 = k * setup.dt_obs;
    propagate(x, t0, t1, rng);
    if (!x.allFinite()) throw Error("truth: non-finite state at step " + std::to_string(k));
    twin.times.push_back(t1);
    twin.truth.push_back(x);
    twin.observations.push_back(setup.meas->observe(x, rng));
  }
  return twin;
}

Matrix initial_ensemble(const TwinSetup& setup, const Twin& twin, Index members, const StreamKey& replicate) {
  Rng rng = (replicate / Stream::InitialEnsemble).rng();
  Matrix e = setup.draw_ensemble(twin.initial, members, rng);
  if (e.rows() != setup.meas->state_dim() || e.cols() != members)
    throw Error("initial ensemble: sampler returned the wrong shape");
  return e;
}

AssimilationResult run_assimilation(const TwinSetup& setup, const Twin& twin, const Matrix& initial,
                                    const FilterSpec& filter, const StreamKey& replicate, int threads,
                                    const StepObserver& observer) {
  const Index n = initial.cols();
  if (filter.kind == FilterKind::TEnKF) filter.trim.validate(n);
  if (filter.augment) filter.augment->validate();

  const Propagator propagate = propagator_for(setup);
  const MeasModel& meas = *setup.meas;
  AssimilationResult out;
  Matrix members = initial;

  for (std::size_t s = 0; s < twin.times.size(); ++s) {
    const auto k = static_cast<std::uint64_t>(s + 1);
    const double t0 = static_cast<double>(s) * setup.dt_obs;
    const Vector& y_star = twin.observations[s];
    try {
      JointEnsemble j = forecast(members, propagate, meas, t0, setup.dt_obs, (replicate / Stream::Forecast).child(k),
                                 threads);
      Index within = -1;
      if (filter.kind == FilterKind::TEnKF && filter.augment) {
        const ForecastPipeline pipeline = [&](const Matrix& init, const StreamKey& key) {
          return forecast(init, propagate, meas, t0, setup.dt_obs, key, threads);
        };
        Rng aug_rng = (replicate / Stream::Augment).child(k).rng();
        AugmentResult aug = augment_forecast(j, members, y_star, *filter.augment, pipeline, aug_rng,
                                             (replicate / Stream::AugmentForecast).child(k));
        within = aug.members_within;
        j = std::move(aug.ensemble);
      }

      Rng update_rng = (replicate / Stream::Update).child(k).rng();
      FilterState state;
      switch (filter.kind) {
        case FilterKind::EnKF: state = enkf_update(j, y_star); break;
        case FilterKind::TEnKF: state = tenkf_update(j, y_star, filter.trim, update_rng, n); break;
        case FilterKind::PF: state = pf_update(j, y_star, meas, update_rng, n); break;
      }
      state.diagnostics.members_within = within;
      members = std::move(state.posterior.members);

      StepRecord rec;
      rec.time = twin.times[s];
      rec.rmse = ensemble_rmse(members, twin.truth[s]);
      rec.mean_rmse = mean_rmse(members, twin.truth[s]);
      rec.diagnostics = std::move(state.diagnostics);
      out.rmse.times.push_back(rec.time);
      out.rmse.values.push_back(rec.rmse);
      out.mean_rmse.times.push_back(rec.time);
      out.mean_rmse.values.push_back(rec.mean_rmse);
      if (observer) observer(s, members, rec);
      out.steps.push_back(std::move(rec));
    } catch (const std::exception& e) {
      throw Error("assimilation step " + std::to_string(k) + ": " + e.what());
    }
  }
  out.posterior = std::move(members);
  return out;
}

}  // namespace tenkf
