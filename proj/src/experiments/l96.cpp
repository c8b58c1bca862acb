#include "scenarios.hpp"

#include <algorithm>
#include <bit>
#include <map>

namespace tenkf::experiments::detail {

TwinSetup l96_twin(const Json& p, const IntegratorConfig& integrator, double dt_obs) {
  Lorenz96Params lp;
  lp.dim = p["dim"];
  lp.forcing = p["forcing"];
  lp.sigma = p["sigma"];
  lp.include_damping = p["damping"];
  const double tau = p["tau"], mu0 = p["mu0"], mu1 = p["mu1"], s0 = p["sigma0"];
  auto meas = std::make_shared<SelectionMeas>(l96_observation(lp.dim, tau));

  TwinSetup setup;
  setup.model = std::make_shared<Lorenz96>(lp);
  setup.meas = meas;
  setup.integrator = integrator;
  setup.dt_obs = dt_obs;
  setup.t_final = p["t_final"];
  // z shifts the common centre of truth and ensemble; it is drawn once per replicate.
  setup.draw_initial = [=, dim = lp.dim](Rng& rng) {
    TwinInitial init;
    const double z = standard_normal(1, rng)[0];
    init.prior_mean = Vector::Constant(dim, mu0 + mu1 * z);
    init.truth = init.prior_mean + s0 * standard_normal(dim, rng);
    init.observation = meas->observe(init.truth, rng);
    return init;
  };
  // Unobserved components share the truth's prior; observed ones are drawn around y_0.
  setup.draw_ensemble = [=, dim = lp.dim](const TwinInitial& init, Index n, Rng& rng) {
    Matrix e(dim, n);
    fill_standard_normal(e, rng);
    e = (s0 * e).colwise() + init.prior_mean;
    Matrix noise(meas->obs_dim(), n);
    fill_standard_normal(noise, rng);
    const auto& comps = meas->components();
    for (std::size_t k = 0; k < comps.size(); ++k)
      e.row(comps[k]) = (tau * noise.row(static_cast<Index>(k))).array() + init.observation[static_cast<Index>(k)];
    return e;
  };
  return setup;
}

TrimConfig trim_config(const Json& p) {
  TrimConfig t;
  t.distance = p["distance"] == "max-abs" ? Distance::MaxAbs : Distance::NormalizedL1;
  t.target_ne = p["target_ne"].get<double>();
  t.ne_tolerance = p["ne_tolerance"];
  t.lambda_min = p["lambda_min"];
  t.lambda_max = p["lambda_max"];
  t.max_bisect_iters = p["max_bisect_iters"];
  t.trimmed_gain = p["trimmed_gain"];
  return t;
}

StreamKey cell_key(const StreamKey& replicate, double dt_obs, Index members) {
  const StreamKey k = replicate.child(std::bit_cast<std::uint64_t>(dt_obs));
  return members > 0 ? k.child(static_cast<std::uint64_t>(members)) : k;
}

double median(std::vector<double> v) { return replicate_quantiles(std::move(v), {0.5}).front(); }

namespace {

FilterKind parse_filter(const std::string& s) {
  if (s == "EnKF") return FilterKind::EnKF;
  if (s == "TEnKF") return FilterKind::TEnKF;
  return FilterKind::PF;
}

struct RunCell {
  std::string error;
  AssimilationResult result;
  bool done = false;
};

// Paired comparison of TEnKF against EnKF over the replicates where both finished.
void compare_pair(Context& ctx, const std::vector<double>& enkf, const std::vector<double>& tenkf,
                  const std::string& detail, bool gating, bool sign_test) {
  if (enkf.empty()) {
    ctx.check("median_rmse_tenkf_below_enkf", -1, detail, 0.0, 0.0, false, gating);
    return;
  }
  const double diff = median(tenkf) - median(enkf);
  ctx.check("median_rmse_tenkf_below_enkf", -1, detail, diff, 0.0, diff < 0.0, gating);
  if (!sign_test) return;
  int wins = 0;
  for (std::size_t i = 0; i < enkf.size(); ++i) wins += tenkf[i] < enkf[i] ? 1 : 0;
  const double pv = sign_test_pvalue(wins, static_cast<int>(enkf.size()));
  ctx.check("sign_test_tenkf_beats_enkf", -1, detail + ";wins=" + std::to_string(wins) + "/" + std::to_string(enkf.size()),
            pv, tolerance::kSignTestAlpha, pv < tolerance::kSignTestAlpha, gating);
}

}  // namespace

void run_l96_sweep(Context& ctx) {
  const Json& p = ctx.p();
  const auto dts = p["dt_obs"].get<std::vector<double>>();
  const auto sizes = p["members"].get<std::vector<Index>>();
  const auto names = p["filters"].get<std::vector<std::string>>();
  const double gate = p["gate_dt_obs_min"];
  IntegratorConfig ic;
  ic.scheme = Scheme::StochasticHeun;
  ic.dt = p["dt"];

  std::vector<FilterSpec> specs;
  for (const auto& name : names) {
    FilterSpec f;
    f.kind = parse_filter(name);
    f.trim = trim_config(p);
    specs.push_back(f);
  }

  const auto reps = static_cast<std::size_t>(ctx.replicates());
  const std::size_t per_rep = dts.size() * sizes.size() * specs.size();
  std::vector<RunCell> cells(reps * per_rep);
  auto at = [&](std::size_t m, std::size_t d, std::size_t s, std::size_t f) -> RunCell& {
    return cells[((m * dts.size() + d) * sizes.size() + s) * specs.size() + f];
  };

  ctx.for_replicates([&](int m, int threads) {
    const StreamKey rep = ctx.replicate_key(m);
    for (std::size_t d = 0; d < dts.size(); ++d) {
      const TwinSetup setup = l96_twin(p, ic, dts[d]);
      std::optional<Twin> twin;
      std::string twin_error;
      try {
        twin = simulate_twin(setup, cell_key(rep, dts[d]));
      } catch (const std::exception& e) {
        twin_error = std::string("truth: ") + e.what();
      }
      for (std::size_t s = 0; s < sizes.size(); ++s) {
        const StreamKey key = cell_key(rep, dts[d], sizes[s]);
        std::optional<Matrix> initial;
        if (twin) initial = initial_ensemble(setup, *twin, sizes[s], key);
        for (std::size_t f = 0; f < specs.size(); ++f) {
          RunCell& c = at(static_cast<std::size_t>(m), d, s, f);
          if (!twin) {
            c.error = twin_error;
            continue;
          }
          try {
            c.result = run_assimilation(setup, *twin, *initial, specs[f], key, threads);
            c.done = true;
          } catch (const std::exception& e) {
            c.error = e.what();
          }
        }
      }
    }
  });

  CsvWriter rmse(ctx.file("rmse.csv"), {"replicate", "filter", "n", "dt_obs", "rmse_time_avg", "rmse_mean_time_avg"});
  CsvWriter series(ctx.file("rmse_series.csv"), {"replicate", "filter", "n", "dt_obs", "step", "time", "rmse",
                                                 "rmse_mean", "effective_size", "lambda", "flag"});
  // (filter, n, dt) -> per-replicate time averages, NaN where the run failed.
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::vector<double>> table;
  for (std::size_t m = 0; m < reps; ++m)
    for (std::size_t d = 0; d < dts.size(); ++d)
      for (std::size_t s = 0; s < sizes.size(); ++s)
        for (std::size_t f = 0; f < specs.size(); ++f) {
          const RunCell& c = at(m, d, s, f);
          auto& col = table[{f, s, d}];
          const std::string detail = names[f] + " n=" + label(sizes[s]) + " dt_obs=" + label(dts[d]);
          if (!c.done) {
            ctx.fail(static_cast<int>(m), "assimilation " + detail, c.error);
            col.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
          }
          if (c.result.steps.empty()) {
            col.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
          }
          const double avg = c.result.rmse.aggregate();
          col.push_back(avg);
          rmse.row(m, names[f], sizes[s], dts[d], avg, c.result.mean_rmse.aggregate());
          for (std::size_t k = 0; k < c.result.steps.size(); ++k) {
            const auto& st = c.result.steps[k];
            series.row(m, names[f], sizes[s], dts[d], k + 1, st.time, st.rmse, st.mean_rmse,
                       st.diagnostics.effective_size, st.diagnostics.lambda, st.diagnostics.flag);
          }
        }

  CsvWriter quant(ctx.file("quantiles.csv"), {"filter", "n", "dt_obs", "replicates", "q25", "q50", "q75"});
  for (std::size_t f = 0; f < specs.size(); ++f)
    for (std::size_t s = 0; s < sizes.size(); ++s)
      for (std::size_t d = 0; d < dts.size(); ++d) {
        std::vector<double> ok;
        for (double v : table[{f, s, d}])
          if (std::isfinite(v)) ok.push_back(v);
        if (ok.empty()) continue;
        const auto q = replicate_quantiles(ok);
        quant.row(names[f], sizes[s], dts[d], ok.size(), q[0], q[1], q[2]);
      }

  const auto e = std::find(names.begin(), names.end(), "EnKF");
  const auto t = std::find(names.begin(), names.end(), "TEnKF");
  if (e == names.end() || t == names.end()) return;
  const auto fe = static_cast<std::size_t>(e - names.begin()), ft = static_cast<std::size_t>(t - names.begin());
  for (std::size_t s = 0; s < sizes.size(); ++s)
    for (std::size_t d = 0; d < dts.size(); ++d) {
      std::vector<double> a, b;
      const auto& ce = table[{fe, s, d}];
      const auto& ct = table[{ft, s, d}];
      for (std::size_t m = 0; m < reps; ++m)
        if (std::isfinite(ce[m]) && std::isfinite(ct[m])) {
          a.push_back(ce[m]);
          b.push_back(ct[m]);
        }
      compare_pair(ctx, a, b, "n=" + label(sizes[s]) + ";dt_obs=" + label(dts[d]), dts[d] >= gate, true);
    }
}

void run_l96_aug(Context& ctx) {
  const Json& p = ctx.p();
  const auto dts = p["dt_obs"].get<std::vector<double>>();
  const Index n = p["members"];
  const double gate = p["gate_dt_obs_min"];
  const double r_max = p["r_max"];
  IntegratorConfig ic;
  const std::string scheme = p["integrator"];
  ic.scheme = scheme == "rk45" ? Scheme::Rk45Adaptive : scheme == "rk4" ? Scheme::Rk4 : Scheme::StochasticHeun;
  ic.dt = p["dt"];
  ic.rtol = p["rtol"];
  ic.atol = p["atol"];

  FilterSpec enkf;
  FilterSpec tenkf;
  tenkf.kind = FilterKind::TEnKF;
  tenkf.trim = trim_config(p);
  AugmentConfig aug;
  aug.d_max = p["d_max"];
  aug.r_max = r_max;
  aug.sigma_p = p["sigma_p"];
  aug.distance = Distance::MaxAbs;
  tenkf.augment = aug;
  const std::vector<std::pair<std::string, FilterSpec>> specs = {{"EnKF", enkf}, {"TEnKF", tenkf}};

  const auto reps = static_cast<std::size_t>(ctx.replicates());
  std::vector<RunCell> cells(reps * dts.size() * specs.size());
  auto at = [&](std::size_t m, std::size_t d, std::size_t f) -> RunCell& {
    return cells[(m * dts.size() + d) * specs.size() + f];
  };

  ctx.for_replicates([&](int m, int threads) {
    const StreamKey rep = ctx.replicate_key(m);
    for (std::size_t d = 0; d < dts.size(); ++d) {
      const TwinSetup setup = l96_twin(p, ic, dts[d]);
      const StreamKey key = cell_key(rep, dts[d], n);
      try {
        const Twin twin = simulate_twin(setup, cell_key(rep, dts[d]));
        const Matrix initial = initial_ensemble(setup, twin, n, key);
        for (std::size_t f = 0; f < specs.size(); ++f) {
          RunCell& c = at(static_cast<std::size_t>(m), d, f);
          try {
            c.result = run_assimilation(setup, twin, initial, specs[f].second, key, threads);
            c.done = true;
          } catch (const std::exception& e) {
            c.error = e.what();
          }
        }
      } catch (const std::exception& e) {
        for (std::size_t f = 0; f < specs.size(); ++f) at(static_cast<std::size_t>(m), d, f).error = e.what();
      }
    }
  });

  CsvWriter rmse(ctx.file("rmse.csv"), {"replicate", "filter", "n", "dt_obs", "rmse_time_avg", "rmse_mean_time_avg"});
  CsvWriter trace(ctx.file("trace.csv"), {"replicate", "filter", "dt_obs", "step", "time", "forecast_members",
                                          "members_within", "effective_size", "lambda", "rmse", "flag"});
  CsvWriter effort(ctx.file("effort.csv"), {"replicate", "dt_obs", "aug_ratio_time_avg"});

  std::vector<std::vector<double>> rm(dts.size() * specs.size());
  std::vector<std::vector<double>> ratios(dts.size());
  for (std::size_t m = 0; m < reps; ++m)
    for (std::size_t d = 0; d < dts.size(); ++d) {
      const bool paired = at(m, d, 0).done && at(m, d, 1).done && !at(m, d, 0).result.steps.empty();
      for (std::size_t f = 0; f < specs.size(); ++f) {
        const RunCell& c = at(m, d, f);
        if (!c.done) {
          ctx.fail(static_cast<int>(m), "assimilation " + specs[f].first + " dt_obs=" + label(dts[d]), c.error);
          continue;
        }
        if (c.result.steps.empty()) continue;
        const double avg = c.result.rmse.aggregate();
        rmse.row(m, specs[f].first, n, dts[d], avg, c.result.mean_rmse.aggregate());
        if (paired) rm[d * specs.size() + f].push_back(avg);
        double ratio = 0.0;
        for (std::size_t k = 0; k < c.result.steps.size(); ++k) {
          const auto& st = c.result.steps[k];
          trace.row(m, specs[f].first, dts[d], k + 1, st.time, st.diagnostics.forecast_members,
                    st.diagnostics.members_within, st.diagnostics.effective_size, st.diagnostics.lambda, st.rmse,
                    st.diagnostics.flag);
          ratio += static_cast<double>(st.diagnostics.forecast_members) / static_cast<double>(n);
        }
        if (specs[f].second.augment) {
          ratio /= static_cast<double>(c.result.steps.size());
          effort.row(m, dts[d], ratio);
          ratios[d].push_back(ratio);
          ctx.check("aug_ratio_within_bounds", static_cast<int>(m), "dt_obs=" + label(dts[d]), ratio, r_max,
                    ratio >= 1.0 && ratio <= r_max);
        }
      }
    }

  // Mean effort must grow with the observation interval.
  std::vector<std::size_t> order(dts.size());
  for (std::size_t d = 0; d < dts.size(); ++d) order[d] = d;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return dts[a] < dts[b]; });
  auto mean_of = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
  };
  for (std::size_t i = 1; i < order.size(); ++i) {
    const double lo = mean_of(ratios[order[i - 1]]), hi = mean_of(ratios[order[i]]);
    ctx.check("mean_aug_ratio_increases_with_dt_obs", -1,
              "dt_obs=" + label(dts[order[i - 1]]) + "->" + label(dts[order[i]]), hi - lo, 0.0, hi - lo > 0.0);
  }
  for (std::size_t d = 0; d < dts.size(); ++d)
    compare_pair(ctx, rm[d * specs.size()], rm[d * specs.size() + 1], "n=" + label(n) + ";dt_obs=" + label(dts[d]),
                 dts[d] >= gate, false);
}

}  // namespace tenkf::experiments::detail
