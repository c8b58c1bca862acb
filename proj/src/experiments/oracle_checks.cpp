#include "scenarios.hpp"

#include "tenkf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tenkf::experiments::detail {

void run_linear_gaussian(Context& ctx) {
  const Json& p = ctx.p();
  const double a = p["a"], q = p["q"], h = p["h"], r = p["r"];
  const double m0 = p["prior_mean"], v0 = p["prior_var"];
  const int steps = p["steps"];
  const Index n = p["members"];
  const double k_se = tolerance::kKalmanStdErrors;

  const LinearGaussianModel model =
      linear_gaussian_model(Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, q), Matrix::Constant(1, 1, h),
                            Matrix::Constant(1, 1, r));
  TwinSetup setup;
  setup.meas = model.measurement;
  setup.propagator = [dyn = model.dynamics](Eigen::Ref<Vector> x, double, double, Rng& rng) {
    x = dyn->advance(x, rng);
  };
  setup.dt_obs = 1.0;
  setup.t_final = steps;
  setup.draw_initial = [=](Rng& rng) {
    TwinInitial init;
    init.prior_mean = Vector::Constant(1, m0);
    init.truth = init.prior_mean + std::sqrt(v0) * standard_normal(1, rng);
    init.observation = model.measurement->observe(init.truth, rng);
    return init;
  };
  setup.draw_ensemble = [=](const TwinInitial& init, Index count, Rng& rng) {
    Matrix e(1, count);
    fill_standard_normal(e, rng);
    return Matrix((std::sqrt(v0) * e).array() + init.prior_mean[0]);
  };

  FilterSpec enkf, tenkf, pf;
  tenkf.kind = FilterKind::TEnKF;
  tenkf.trim.lambda = p["lambda"];
  pf.kind = FilterKind::PF;
  const std::vector<std::pair<std::string, FilterSpec>> specs = {{"EnKF", enkf}, {"TEnKF", tenkf}, {"PF", pf}};

  struct Moment {
    double mean, var, ne;
  };
  struct Result {
    std::string error;
    std::vector<Gaussian> exact;
    std::vector<std::vector<Moment>> filters;
  };
  std::vector<Result> results(static_cast<std::size_t>(ctx.replicates()));

  ctx.for_replicates([&](int m, int threads) {
    auto& res = results[static_cast<std::size_t>(m)];
    try {
      const StreamKey key = ctx.replicate_key(m);
      const Twin twin = simulate_twin(setup, key);
      const Matrix initial = initial_ensemble(setup, twin, n, key);
      Gaussian g{Vector::Constant(1, m0), Matrix::Constant(1, 1, v0)};
      for (const auto& y : twin.observations) {
        g = kalman_filter_exact(model, kalman_forecast(model, g), y);
        res.exact.push_back(g);
      }
      for (const auto& spec : specs) {
        std::vector<Moment> mom;
        run_assimilation(setup, twin, initial, spec.second, key, threads,
                         [&](std::size_t, const Matrix& post, const StepRecord& rec) {
                           const double mean = post.mean();
                           const double var = (post.array() - mean).square().sum() / static_cast<double>(post.cols() - 1);
                           mom.push_back({mean, var, rec.diagnostics.effective_size});
                         });
        res.filters.push_back(std::move(mom));
      }
    } catch (const std::exception& e) {
      res.error = e.what();
    }
  });

  CsvWriter out(ctx.file("moments.csv"), {"replicate", "filter", "step", "mean", "var", "kf_mean", "kf_var",
                                          "se_mean", "se_var", "effective_size"});
  for (int m = 0; m < ctx.replicates(); ++m) {
    const auto& res = results[static_cast<std::size_t>(m)];
    if (!res.error.empty()) {
      ctx.fail(m, "linear-gaussian", res.error);
      continue;
    }
    for (std::size_t f = 0; f < specs.size(); ++f)
      for (std::size_t k = 0; k < res.exact.size(); ++k) {
        const Moment& mo = res.filters[f][k];
        const double kf_mean = res.exact[k].mean[0], kf_var = res.exact[k].cov(0, 0);
        // Resampling filters carry the weighted-sample error (1/n_e) plus the
        // multinomial resampling error (1/n).
        const double nn = static_cast<double>(n);
        const double inv = specs[f].second.kind == FilterKind::EnKF ? 1.0 / nn : 1.0 / mo.ne + 1.0 / nn;
        const double se_mean = std::sqrt(kf_var * inv);
        const double se_var = kf_var * std::sqrt(2.0 * inv);
        out.row(m, specs[f].first, k + 1, mo.mean, mo.var, kf_mean, kf_var, se_mean, se_var, mo.ne);
        const std::string detail = specs[f].first + ";step=" + std::to_string(k + 1);
        const double zm = std::abs(mo.mean - kf_mean) / se_mean;
        const double zv = std::abs(mo.var - kf_var) / se_var;
        ctx.check("posterior_mean_matches_kalman", m, detail, zm, k_se, zm <= k_se);
        ctx.check("posterior_var_matches_kalman", m, detail, zv, k_se, zv <= k_se);
      }
  }
}

void run_bimodal(Context& ctx) {
  const Json& p = ctx.p();
  BimodalToy toy;
  toy.mode = p["mode"];
  toy.mode_var = p["mode_var"];
  toy.noise_var = p["noise_var"];
  toy.y_star = p["y_star"];
  const Index points = p["grid_points"];
  const Index n = p["members"];
  const auto lambdas = p["lambda_grid"].get<std::vector<double>>();
  const double lam_large = p["lambda_large"], lam_small = p["lambda_small"], lam_sample = p["sample_lambda"];

  const JointGrid joint = toy.joint(points);
  const double gain = toy.gain();
  const DensityGrid post = bayes_posterior(joint, toy.y_star);
  const DensityGrid enkf = enkf_limit_pdf(joint, gain, toy.y_star);

  CsvWriter dist(ctx.file("distances.csv"), {"replicate", "comparison", "lambda", "ks"});
  const double ks_bias = ks_distance(enkf, post);
  dist.row(-1, "enkf_limit_vs_posterior", 0.0, ks_bias);
  ctx.check("enkf_limit_differs_from_posterior", -1, "", ks_bias, tolerance::kEnkfBiasKs, ks_bias > tolerance::kEnkfBiasKs);

  const double ks_large = ks_distance(tenkf_limit_pdf(joint, gain, toy.y_star, lam_large), enkf);
  dist.row(-1, "tenkf_limit_vs_enkf_limit", lam_large, ks_large);
  ctx.check("tenkf_limit_zero_trim_matches_enkf", -1, "lambda=" + label(lam_large), ks_large, tolerance::kZeroTrimKs,
            ks_large < tolerance::kZeroTrimKs);

  const double ks_small = ks_distance(tenkf_limit_pdf(joint, gain, toy.y_star, lam_small), post);
  dist.row(-1, "tenkf_limit_vs_posterior", lam_small, ks_small);
  ctx.check("tenkf_limit_full_trim_matches_posterior", -1, "lambda=" + label(lam_small), ks_small,
            tolerance::kFullTrimKs, ks_small < tolerance::kFullTrimKs);

  std::vector<double> sorted = lambdas;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  CsvWriter dens(ctx.file("densities.csv"), [&] {
    std::vector<std::string> h = {"x", "prior", "posterior", "enkf_limit"};
    for (double l : sorted) h.push_back("tenkf_limit_lambda=" + label(l));
    return h;
  }());
  std::vector<DensityGrid> sweep;
  double worst = -1.0;
  for (double l : sorted) {
    sweep.push_back(tenkf_limit_pdf(joint, gain, toy.y_star, l));
    const double ks = ks_distance(sweep.back(), post);
    dist.row(-1, "tenkf_limit_vs_posterior", l, ks);
    if (sweep.size() > 1) worst = std::max(worst, ks - ks_distance(sweep[sweep.size() - 2], post));
  }
  if (sweep.size() > 1)
    ctx.check("tenkf_limit_ks_nonincreasing_as_lambda_shrinks", -1, "", worst, 0.0, worst <= 0.0);
  const DensityGrid prior = joint.marginal_x();
  for (Index i = 0; i < joint.x.points; ++i) {
    std::vector<std::string> row = {num(joint.x.at(i)), num(prior.values[i]), num(post.values[i]), num(enkf.values[i])};
    for (const auto& s : sweep) row.push_back(num(s.values[i]));
    dens.row_strings(row);
  }

  // Finite-sample filters against the limit densities.
  struct Result {
    std::string error;
    double ks_tenkf = 0.0, ks_pf = 0.0, ne_tenkf = 0.0, ne_pf = 0.0;
  };
  std::vector<Result> results(static_cast<std::size_t>(ctx.replicates()));
  const LinearGaussianMeas meas(Matrix::Identity(1, 1), Matrix::Constant(1, 1, toy.noise_var));
  ctx.for_replicates([&](int m, int) {
    auto& res = results[static_cast<std::size_t>(m)];
    try {
      const StreamKey key = ctx.replicate_key(m);
      Rng draw = (key / Stream::Forecast).rng();
      auto [x, y] = toy.sample(n, draw);
      const JointEnsemble j(std::move(x), std::move(y));
      const Vector y_star = Vector::Constant(1, toy.y_star);

      TrimConfig trim;
      trim.lambda = lam_sample;
      Rng t_rng = (key / Stream::Update).child(1).rng();
      const FilterState t = tenkf_update(j, y_star, trim, t_rng);
      // Same effective trim as the sampled filter: its gain and its distance scale.
      const double k_hat = kalman_gain(j).gain(0, 0);
      const double scale = sample_std(j.observations)[0];
      const DensityGrid limit = tenkf_limit_pdf(joint, k_hat, toy.y_star, lam_sample, scale);
      res.ks_tenkf = ks_distance(row_sample(t.posterior.members, 0), limit);
      res.ne_tenkf = t.diagnostics.effective_size;

      Rng p_rng = (key / Stream::Update).child(0).rng();
      const FilterState pf = pf_update(j, y_star, meas, p_rng);
      res.ks_pf = ks_distance(row_sample(pf.posterior.members, 0), post);
      res.ne_pf = pf.diagnostics.effective_size;
    } catch (const std::exception& e) {
      res.error = e.what();
    }
  });
  for (int m = 0; m < ctx.replicates(); ++m) {
    const auto& res = results[static_cast<std::size_t>(m)];
    if (!res.error.empty()) {
      ctx.fail(m, "bimodal sampling", res.error);
      continue;
    }
    dist.row(m, "tenkf_sample_vs_limit", lam_sample, res.ks_tenkf);
    dist.row(m, "pf_sample_vs_posterior", 0.0, res.ks_pf);
    ctx.check("tenkf_sample_matches_limit", m, "lambda=" + label(lam_sample), res.ks_tenkf, tolerance::kTenkfSampleKs,
              res.ks_tenkf < tolerance::kTenkfSampleKs);
    ctx.check("pf_sample_matches_posterior", m, "", res.ks_pf, tolerance::kPfSampleKs, res.ks_pf < tolerance::kPfSampleKs);
  }
}

}  // namespace tenkf::experiments::detail
