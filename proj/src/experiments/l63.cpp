#include "scenarios.hpp"

#include <algorithm>
#include <numeric>

namespace tenkf::experiments::detail {

namespace {

struct FilterSample {
  std::string name;
  double lambda = 0.0;
  double effective_size = 0.0;
  std::vector<double> x2;
};

struct ReplicateResult {
  std::string error;
  std::vector<FilterSample> filters;  // EnKF, PF, then TEnKF per lambda in grid order
};

}  // namespace

void run_l63(Context& ctx) {
  const Json& p = ctx.p();
  Lorenz63Params lp;
  lp.alpha = p["alpha"];
  lp.rho = p["rho"];
  lp.beta = p["beta"];
  lp.sigma = p["sigma"];
  const double tau = p["tau"], t1 = p["t1"];
  const Index n = p["members"];
  const double x1 = p["x1_0"], x3 = p["x3_0"], s1 = p["sigma1_0"], s3 = p["sigma3_0"];
  const double x2_center = p["x2_truth_center"];
  const auto lambdas = p["lambda_grid"].get<std::vector<double>>();
  const int bins = p["hist_bins"];

  auto meas = std::make_shared<SelectionMeas>(l63_observation(tau));
  TwinSetup setup;
  setup.model = std::make_shared<Lorenz63>(lp);
  setup.meas = meas;
  setup.integrator.scheme = Scheme::StochasticHeun;
  setup.integrator.dt = p["dt"];
  setup.dt_obs = t1;
  setup.t_final = t1;
  setup.draw_initial = [=](Rng& rng) {
    TwinInitial init;
    const Vector z = standard_normal(3, rng);
    init.truth = Vector{{x1 + s1 * z[0], x2_center + tau * z[1], x3 + s3 * z[2]}};
    init.observation = meas->observe(init.truth, rng);
    // The x2 prior is centred on the t = 0 observation of the truth, with spread tau.
    init.prior_mean = Vector{{x1, init.observation[0], x3}};
    return init;
  };
  setup.draw_ensemble = [=](const TwinInitial& init, Index count, Rng& rng) {
    Matrix e(3, count);
    fill_standard_normal(e, rng);
    const Vector scale{{s1, tau, s3}};
    return Matrix((scale.asDiagonal() * e).colwise() + init.prior_mean);
  };

  std::vector<ReplicateResult> results(static_cast<std::size_t>(ctx.replicates()));
  ctx.for_replicates([&](int m, int threads) {
    auto& res = results[static_cast<std::size_t>(m)];
    try {
      const StreamKey key = ctx.replicate_key(m);
      const Twin twin = simulate_twin(setup, key);
      const Matrix initial = initial_ensemble(setup, twin, n, key);
      const Propagator propagate = make_propagator(setup.model, setup.integrator);
      const JointEnsemble j = forecast(initial, propagate, *meas, 0.0, t1, (key / Stream::Forecast).child(1), threads);
      const Vector& y_star = twin.observations.at(0);

      auto keep = [&](std::string name, double lambda, const FilterState& s) {
        res.filters.push_back({std::move(name), lambda, s.diagnostics.effective_size, row_sample(s.posterior.members, 1).values});
      };
      keep("EnKF", 0.0, enkf_update(j, y_star));
      Rng pf_rng = (key / Stream::Update).child(0).rng();
      keep("PF", 0.0, pf_update(j, y_star, *meas, pf_rng));
      for (std::size_t l = 0; l < lambdas.size(); ++l) {
        TrimConfig trim;
        trim.distance = Distance::NormalizedL1;
        trim.lambda = lambdas[l];
        Rng rng = (key / Stream::Update).child(1 + l).rng();
        keep("TEnKF_lambda=" + label(lambdas[l]), lambdas[l], tenkf_update(j, y_star, trim, rng));
      }
    } catch (const std::exception& e) {
      res.error = e.what();
    }
  });

  CsvWriter ks(ctx.file("ks.csv"), {"replicate", "filter", "lambda", "effective_size", "ks_to_pf"});
  for (int m = 0; m < ctx.replicates(); ++m) {
    const auto& res = results[static_cast<std::size_t>(m)];
    if (!res.error.empty()) {
      ctx.fail(m, "l63 update", res.error);
      continue;
    }
    const auto& pf = res.filters[1].x2;
    std::vector<double> dist;
    for (const auto& f : res.filters) {
      dist.push_back(ks_distance(WeightedSample(f.x2), WeightedSample(pf)));
      ks.row(m, f.name, f.lambda, f.effective_size, dist.back());
    }

    // Common bin range so the per-filter histograms overlay.
    double lo = pf.front(), hi = pf.front();
    for (const auto& f : res.filters) {
      const auto [a, b] = std::minmax_element(f.x2.begin(), f.x2.end());
      lo = std::min(lo, *a);
      hi = std::max(hi, *b);
    }
    if (!(hi > lo)) hi = lo + 1.0;
    for (const auto& f : res.filters) {
      const Histogram h = histogram(f.x2, lo, hi, bins);
      CsvWriter out(ctx.file("hist_rep" + std::to_string(m) + "_" + f.name + ".csv"), {"bin_lo", "bin_hi", "mass"});
      for (int b = 0; b < bins; ++b)
        out.row(h.edges[static_cast<std::size_t>(b)], h.edges[static_cast<std::size_t>(b) + 1],
                h.masses[static_cast<std::size_t>(b)]);
    }

    // Order the sweep from the weakest to the strongest trim.
    std::vector<std::size_t> order(lambdas.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return lambdas[a] > lambdas[b]; });
    double worst_step = -1.0;
    for (std::size_t i = 1; i < order.size(); ++i)
      worst_step = std::max(worst_step, dist[2 + order[i]] - dist[2 + order[i - 1]]);
    if (order.size() > 1)
      ctx.check("ks_to_pf_decreases_with_lambda", m, "x2", worst_step, 0.0, worst_step < 0.0);
    const double ratio = dist[2 + order.back()] / dist[0];
    ctx.check("ks_smallest_lambda_over_enkf", m, "x2", ratio, tolerance::kL63KsRatio, ratio < tolerance::kL63KsRatio);
  }
}

}  // namespace tenkf::experiments::detail
