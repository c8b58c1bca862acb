#include "tenkf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tenkf {

namespace {

double normal_pdf(double x, double mean, double var) {
  const double z = x - mean;
  return std::exp(-0.5 * z * z / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

// Linear interpolation of nodal values on `axis`; zero outside.
double interp(const GridAxis& axis, const Eigen::Ref<const Vector>& v, double x) {
  const double u = (x - axis.lo) / axis.step();
  if (u < 0.0 || u > static_cast<double>(axis.points - 1)) return 0.0;
  const auto i = std::min(static_cast<Index>(u), axis.points - 2);
  const double f = u - static_cast<double>(i);
  return (1.0 - f) * v[i] + f * v[i + 1];
}

// Adds the column `src` evaluated at (node - shift) into `acc`, scaled by `weight`.
void add_shifted(const GridAxis& axis, const Eigen::Ref<const Vector>& src, double shift, double weight,
                 Vector& acc) {
  if (weight == 0.0) return;
  const double cells = shift / axis.step();
  const double base = std::floor(cells);
  const auto offset = static_cast<Index>(base);
  const double f = cells - base;
  const Index p = axis.points;
  // value at node i: interpolate src at index (i - cells) = (i - offset - 1) + (1 - f)
  for (Index i = 0; i < p; ++i) {
    const Index k = i - offset;  // src index for f = 0
    double v = 0.0;
    if (f == 0.0) {
      if (k >= 0 && k < p) v = src[k];
    } else {
      const Index lo = k - 1;
      const double a = (lo >= 0 && lo < p) ? src[lo] : 0.0;
      const double b = (k >= 0 && k < p) ? src[k] : 0.0;
      v = f * a + (1.0 - f) * b;
    }
    acc[i] += weight * v;
  }
}

}  // namespace

Vector GridAxis::weights() const {
  Vector w = Vector::Constant(points, step());
  w[0] *= 0.5;
  w[points - 1] *= 0.5;
  return w;
}

void GridAxis::validate() const {
  if (points < 2) throw Error("grid: need at least two points");
  if (!(hi > lo)) throw Error("grid: need hi > lo");
}

DensityGrid::DensityGrid(GridAxis a, Vector v) : axis(a), values(std::move(v)) {
  axis.validate();
  if (values.size() != axis.points) throw Error("density grid: value count does not match the axis");
  if ((values.array() < 0.0).any()) throw Error("density grid: negative density");
}

double DensityGrid::integral() const { return axis.weights().dot(values); }

DensityGrid& DensityGrid::normalize() {
  const double mass = integral();
  if (!(mass > 0.0) || !std::isfinite(mass)) throw Error("density grid: zero or non-finite mass");
  values /= mass;
  return *this;
}

double DensityGrid::mean() const { return axis.weights().cwiseProduct(values).dot(axis.nodes()) / integral(); }

double DensityGrid::variance() const {
  const double m = mean();
  const Vector c = axis.nodes().array() - m;
  return axis.weights().cwiseProduct(values).dot(c.cwiseProduct(c)) / integral();
}

Vector DensityGrid::cdf() const {
  Vector c(axis.points);
  c[0] = 0.0;
  const double h = axis.step();
  for (Index i = 1; i < axis.points; ++i) c[i] = c[i - 1] + 0.5 * h * (values[i - 1] + values[i]);
  return c / integral();
}

double DensityGrid::cdf_at(double x) const {
  if (x <= axis.lo) return 0.0;
  if (x >= axis.hi) return 1.0;
  return interp(axis, cdf(), x);
}

double DensityGrid::value_at(double x) const { return interp(axis, values, x); }

// ---------------------------------------------------------------------------

JointGrid JointGrid::tabulate(const GridAxis& x, const GridAxis& y, const std::function<double(double, double)>& pdf) {
  x.validate();
  y.validate();
  JointGrid g{x, y, Matrix(x.points, y.points)};
  for (Index j = 0; j < y.points; ++j) {
    const double yj = y.at(j);
    for (Index i = 0; i < x.points; ++i) g.values(i, j) = pdf(x.at(i), yj);
  }
  return g;
}

DensityGrid JointGrid::marginal_x() const { return DensityGrid(x, values * y.weights()); }

DensityGrid JointGrid::marginal_y() const { return DensityGrid(y, values.transpose() * x.weights()); }

double JointGrid::integral() const { return x.weights().dot(values * y.weights()); }

JointGrid& JointGrid::normalize() {
  const double mass = integral();
  if (!(mass > 0.0)) throw Error("joint grid: zero mass");
  values /= mass;
  return *this;
}

DensityGrid bayes_posterior(const JointGrid& joint, double y_star) {
  if (y_star < joint.y.lo || y_star > joint.y.hi) throw Error("bayes_posterior: y* outside the y axis");
  const double u = (y_star - joint.y.lo) / joint.y.step();
  const auto j = std::min(static_cast<Index>(u), joint.y.points - 2);
  const double f = u - static_cast<double>(j);
  DensityGrid post(joint.x, (1.0 - f) * joint.values.col(j) + f * joint.values.col(j + 1));
  if (!(post.integral() > 0.0)) throw Error("bayes_posterior: zero density at y*");
  return post.normalize();
}

namespace {

DensityGrid shifted_mixture(const JointGrid& joint, double gain, double y_star, const Vector& column_weight) {
  const Vector wy = joint.y.weights();
  Vector acc = Vector::Zero(joint.x.points);
  for (Index j = 0; j < joint.y.points; ++j) {
    const double shift = gain * (y_star - joint.y.at(j));
    add_shifted(joint.x, joint.values.col(j), shift, wy[j] * column_weight[j], acc);
  }
  DensityGrid out(joint.x, acc.cwiseMax(0.0));
  return out.normalize();
}

}  // namespace

DensityGrid enkf_limit_pdf(const JointGrid& joint, double gain, double y_star) {
  if (!std::isfinite(gain)) throw Error("enkf_limit_pdf: non-finite gain");
  return shifted_mixture(joint, gain, y_star, Vector::Ones(joint.y.points));
}

DensityGrid tenkf_limit_pdf(const JointGrid& joint, double gain, double y_star, double lambda,
                            std::optional<double> scale) {
  if (!(lambda > 0.0)) throw Error("tenkf_limit_pdf: lambda must be positive");
  const double s = scale ? *scale : std::sqrt(joint.marginal_y().variance());
  Vector log_t(joint.y.points);
  for (Index j = 0; j < joint.y.points; ++j) log_t[j] = -std::abs(joint.y.at(j) - y_star) / (s * lambda);
  const Vector t = (log_t.array() - log_t.maxCoeff()).exp();
  return shifted_mixture(joint, gain, y_star, t);
}

double joint_gain(const JointGrid& joint) {
  const Vector wx = joint.x.weights(), wy = joint.y.weights();
  const Vector xs = joint.x.nodes(), ys = joint.y.nodes();
  const Matrix w = wx.asDiagonal() * joint.values * wy.asDiagonal();
  const double mass = w.sum();
  const double mx = xs.dot(w.rowwise().sum()) / mass;
  const double my = ys.dot(w.colwise().sum().transpose()) / mass;
  const Vector xc = xs.array() - mx, yc = ys.array() - my;
  const double cxy = xc.dot(w * yc) / mass;
  const double cyy = yc.cwiseProduct(yc).dot(w.colwise().sum().transpose()) / mass;
  return cxy / cyy;
}

// ---------------------------------------------------------------------------

Gaussian kalman_forecast(const LinearGaussianModel& model, const Gaussian& prior) {
  const Matrix& A = model.dynamics->A();
  return {A * prior.mean, A * prior.cov * A.transpose() + model.dynamics->Q()};
}

Gaussian kalman_filter_exact(const LinearGaussianModel& model, const Gaussian& prior, const Vector& y_star) {
  const Matrix& H = model.measurement->H();
  const Matrix& R = model.measurement->R();
  const Matrix S = H * prior.cov * H.transpose() + R;
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success) throw SingularMatrixError("kalman_filter_exact: singular innovation covariance", 0.0);
  const Matrix K = llt.solve(H * prior.cov).transpose();
  const Matrix I_KH = Matrix::Identity(prior.cov.rows(), prior.cov.cols()) - K * H;
  Gaussian post;
  post.mean = prior.mean + K * (y_star - H * prior.mean);
  post.cov = I_KH * prior.cov * I_KH.transpose() + K * R * K.transpose();
  return post;
}

// ---------------------------------------------------------------------------

double silverman_bandwidth(const std::vector<double>& samples) {
  const auto n = static_cast<double>(samples.size());
  if (samples.size() < 2) throw Error("silverman_bandwidth: need at least two samples");
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  auto q = [&](double p) {
    const double pos = p * (n - 1.0);
    const auto i = static_cast<std::size_t>(pos);
    const double f = pos - static_cast<double>(i);
    return i + 1 < sorted.size() ? (1.0 - f) * sorted[i] + f * sorted[i + 1] : sorted[i];
  };
  const double iqr = q(0.75) - q(0.25);
  double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  if (!(spread > 0.0)) spread = 1e-12;
  return 0.9 * spread * std::pow(n, -0.2);
}

DensityGrid kde_on_grid(const std::vector<double>& samples, const GridAxis& axis, std::optional<double> bandwidth) {
  axis.validate();
  const double h = bandwidth ? *bandwidth : silverman_bandwidth(samples);
  const double dx = axis.step();
  Vector counts = Vector::Zero(axis.points);
  for (double v : samples) {
    const double u = (v - axis.lo) / dx;
    if (u < 0.0 || u > static_cast<double>(axis.points - 1)) continue;
    const auto i = std::min(static_cast<Index>(u), axis.points - 2);
    const double f = u - static_cast<double>(i);
    counts[i] += 1.0 - f;
    counts[i + 1] += f;
  }
  const auto half = static_cast<Index>(std::ceil(6.0 * h / dx));
  Vector kernel(2 * half + 1);
  for (Index k = -half; k <= half; ++k) kernel[k + half] = normal_pdf(static_cast<double>(k) * dx, 0.0, h * h);
  kernel /= kernel.sum();
  Vector out = Vector::Zero(axis.points);
  for (Index i = 0; i < axis.points; ++i) {
    if (counts[i] == 0.0) continue;
    const Index a = std::max<Index>(0, i - half), b = std::min<Index>(axis.points - 1, i + half);
    for (Index k = a; k <= b; ++k) out[k] += counts[i] * kernel[k - i + half];
  }
  DensityGrid g(axis, out);
  return g.normalize();
}

std::vector<double> sample_grid(const DensityGrid& g, Index count, Rng& rng) {
  const Vector c = g.cdf();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> out(static_cast<std::size_t>(count));
  for (auto& v : out) {
    const double u = unif(rng);
    const auto it = std::upper_bound(c.data(), c.data() + c.size(), u);
    const Index i = std::clamp<Index>(static_cast<Index>(it - c.data()), 1, c.size() - 1);
    const double span = c[i] - c[i - 1];
    const double f = span > 0.0 ? (u - c[i - 1]) / span : 0.5;
    v = g.axis.at(i - 1) + f * g.axis.step();
  }
  return out;
}

DensityGrid prior_propagate_grid(const DensityGrid& prior, const TransitionSampler& transition, Index n_mc, Rng& rng,
                                 std::optional<GridAxis> out_axis) {
  if (n_mc < 2) throw Error("prior_propagate_grid: need at least two Monte Carlo samples");
  std::vector<double> xs = sample_grid(prior, n_mc, rng);
  for (double& x : xs) x = transition(x, rng);
  GridAxis axis;
  if (out_axis) {
    axis = *out_axis;
  } else {
    double mean = 0.0, ss = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double sd = std::max(std::sqrt(ss / static_cast<double>(xs.size() - 1)), 1e-12);
    axis = GridAxis{mean - 8.0 * sd, mean + 8.0 * sd, prior.axis.points};
  }
  return kde_on_grid(xs, axis);
}

// ---------------------------------------------------------------------------

double BimodalToy::prior_pdf(double x) const {
  return 0.5 * normal_pdf(x, -mode, mode_var) + 0.5 * normal_pdf(x, mode, mode_var);
}

double BimodalToy::joint_pdf(double x, double y) const { return prior_pdf(x) * normal_pdf(y, x, noise_var); }

GridAxis BimodalToy::x_axis(Index points) const {
  const double sd = std::sqrt(x_var());
  return {-8.0 * sd, 8.0 * sd, points};
}

GridAxis BimodalToy::y_axis(Index points) const {
  const double sd = std::sqrt(y_var());
  return {-8.0 * sd, 8.0 * sd, points};
}

JointGrid BimodalToy::joint(Index points) const {
  JointGrid g = JointGrid::tabulate(x_axis(points), y_axis(points), [this](double x, double y) { return joint_pdf(x, y); });
  g.normalize();
  return g;
}

std::pair<Matrix, Matrix> BimodalToy::sample(Index n, Rng& rng) const {
  Matrix x(1, n), y(1, n);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sx = std::sqrt(mode_var), sy = std::sqrt(noise_var);
  for (Index i = 0; i < n; ++i) {
    x(0, i) = (coin(rng) ? mode : -mode) + sx * normal(rng);
    y(0, i) = x(0, i) + sy * normal(rng);
  }
  return {std::move(x), std::move(y)};
}

}  // namespace tenkf
