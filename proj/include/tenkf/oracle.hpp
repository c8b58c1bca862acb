#pragma once

#include "tenkf/core.hpp"
#include "tenkf/models.hpp"
#include "tenkf/rng.hpp"

#include <functional>
#include <optional>

namespace tenkf {

/// Regular grid lo = x_0 < ... < x_{points-1} = hi.
struct GridAxis {
  double lo = 0.0;
  double hi = 1.0;
  Index points = 2048;

  double step() const { return (hi - lo) / static_cast<double>(points - 1); }
  double at(Index i) const { return lo + static_cast<double>(i) * step(); }
  Vector nodes() const { return Vector::LinSpaced(points, lo, hi); }
  /// Trapezoidal quadrature weights.
  Vector weights() const;
  void validate() const;
};

/// Tabulated 1-D density.
struct DensityGrid {
  GridAxis axis;
  Vector values;

  DensityGrid() = default;
  DensityGrid(GridAxis a, Vector v);

  double integral() const;
  /// Rescales to unit trapezoidal mass; throws on zero mass.
  DensityGrid& normalize();
  double mean() const;
  double variance() const;
  /// Cumulative trapezoidal integral at the nodes, ending at 1 for a normalized grid.
  Vector cdf() const;
  /// CDF at an arbitrary point (linear between nodes, 0/1 outside).
  double cdf_at(double x) const;
  /// Density at an arbitrary point (linear between nodes, 0 outside).
  double value_at(double x) const;
};

/// Tabulated joint density p(x, y): rows follow the x axis, columns the y axis.
struct JointGrid {
  GridAxis x;
  GridAxis y;
  Matrix values;

  static JointGrid tabulate(const GridAxis& x, const GridAxis& y, const std::function<double(double, double)>& pdf);

  DensityGrid marginal_x() const;
  DensityGrid marginal_y() const;
  double integral() const;
  JointGrid& normalize();
};

/// p(x | y*) by slicing the joint at y* (linear in y between columns).
DensityGrid bayes_posterior(const JointGrid& joint, double y_star);

/// Limit density of X + K (y* - Y): mixture of conditionals shifted by K (y* - y), weighted by p_Y.
DensityGrid enkf_limit_pdf(const JointGrid& joint, double gain, double y_star);

/// Same mixture with weights p_Y(y) exp(-|y - y*| / (scale * lambda)), renormalized.
/// `scale` defaults to the standard deviation of the y marginal.
DensityGrid tenkf_limit_pdf(const JointGrid& joint, double gain, double y_star, double lambda,
                            std::optional<double> scale = std::nullopt);

/// Exact gain C_XY / C_YY of the tabulated joint.
double joint_gain(const JointGrid& joint);

// ---------------------------------------------------------------------------

struct Gaussian {
  Vector mean;
  Matrix cov;
};

/// A m, A P A^T + Q
Gaussian kalman_forecast(const LinearGaussianModel& model, const Gaussian& prior);

/// Standard Kalman analysis with the Joseph-form covariance update.
Gaussian kalman_filter_exact(const LinearGaussianModel& model, const Gaussian& prior, const Vector& y_star);

// ---------------------------------------------------------------------------

using TransitionSampler = std::function<double(double, Rng&)>;

/// Pushes `prior` through a stochastic transition by Monte Carlo and re-tabulates it
/// with a Gaussian kernel density estimate (Silverman bandwidth). The output axis
/// defaults to the sample mean +- 8 sample standard deviations.
DensityGrid prior_propagate_grid(const DensityGrid& prior, const TransitionSampler& transition, Index n_mc, Rng& rng,
                                 std::optional<GridAxis> out_axis = std::nullopt);

/// Inverse-CDF draws from a tabulated density.
std::vector<double> sample_grid(const DensityGrid& g, Index count, Rng& rng);

/// Kernel density estimate of `samples` on `axis` (linear binning + Gaussian convolution).
DensityGrid kde_on_grid(const std::vector<double>& samples, const GridAxis& axis,
                        std::optional<double> bandwidth = std::nullopt);

double silverman_bandwidth(const std::vector<double>& samples);

// ---------------------------------------------------------------------------

/// Scalar non-Gaussian test problem: X ~ 1/2 N(-2, 0.25) + 1/2 N(2, 0.25),
/// Y = X + N(0, 0.25), observed value 1.5.
struct BimodalToy {
  double mode = 2.0;
  double mode_var = 0.25;
  double noise_var = 0.25;
  double y_star = 1.5;

  double prior_pdf(double x) const;
  double joint_pdf(double x, double y) const;
  /// Exact moments of X and Y.
  double x_var() const { return mode * mode + mode_var; }
  double y_var() const { return x_var() + noise_var; }
  double gain() const { return x_var() / y_var(); }

  /// Axis spanning mean +- 8 standard deviations.
  GridAxis x_axis(Index points = 2048) const;
  GridAxis y_axis(Index points = 2048) const;
  JointGrid joint(Index points = 2048) const;

  /// n joint draws (states row 0, observations row 0).
  std::pair<Matrix, Matrix> sample(Index n, Rng& rng) const;
};

}  // namespace tenkf
