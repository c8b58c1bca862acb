#include "tenkf/models.hpp"

#include <cmath>
#include <numeric>

namespace tenkf {

void Lorenz63Params::validate() const {
  if (!(beta > 0.0)) throw Error("Lorenz63Params: beta must be positive");
  if (!(sigma >= 0.0)) throw Error("Lorenz63Params: sigma must be non-negative");
}

void Lorenz96Params::validate() const {
  if (dim < 4) throw Error("Lorenz96Params: dimension must be at least 4");
  if (!(sigma >= 0.0)) throw Error("Lorenz96Params: sigma must be non-negative");
}

namespace {

inline void l63_eval(const Eigen::Ref<const Vector>& x, const Lorenz63Params& p, Eigen::Ref<Vector> out) {
  out[0] = p.alpha * (x[1] - x[0]);
  out[1] = x[0] * (p.rho - x[2]) - x[1];
  out[2] = x[0] * x[1] - p.beta * x[2];
}

inline void l96_eval(const Eigen::Ref<const Vector>& x, const Lorenz96Params& p, Eigen::Ref<Vector> out) {
  const Index n = x.size();
  const double damping = p.include_damping ? 1.0 : 0.0;
  for (Index j = 0; j < n; ++j) {
    const double xm2 = x[(j + n - 2) % n];
    const double xm1 = x[(j + n - 1) % n];
    const double xp1 = x[(j + 1) % n];
    out[j] = (xp1 - xm2) * xm1 - damping * x[j] + p.forcing;
  }
}

}  // namespace

Vector l63_drift(const Vector& x, const Lorenz63Params& p) {
  if (x.size() != 3) throw Error("l63_drift: state must have three components");
  Vector out(3);
  l63_eval(x, p, out);
  return out;
}

Vector l96_drift(const Vector& x, const Lorenz96Params& p) {
  if (x.size() < 4) throw Error("l96_drift: dimension must be at least 4");
  Vector out(x.size());
  l96_eval(x, p, out);
  return out;
}

Lorenz63::Lorenz63(Lorenz63Params p) : p_(p) { p_.validate(); }

void Lorenz63::drift(const Eigen::Ref<const Vector>& x, double, Eigen::Ref<Vector> dxdt) const {
  l63_eval(x, p_, dxdt);
}

Lorenz96::Lorenz96(Lorenz96Params p) : p_(p) { p_.validate(); }

void Lorenz96::drift(const Eigen::Ref<const Vector>& x, double, Eigen::Ref<Vector> dxdt) const {
  l96_eval(x, p_, dxdt);
}

// ---------------------------------------------------------------------------

SelectionMeas::SelectionMeas(Index state_dim, std::vector<Index> components, double tau)
    : state_dim_(state_dim), components_(std::move(components)), tau_(tau) {
  if (!(tau_ >= 0.0)) throw Error("SelectionMeas: tau must be non-negative");
  if (components_.empty()) throw Error("SelectionMeas: no observed components");
  for (Index c : components_)
    if (c < 0 || c >= state_dim_) throw Error("SelectionMeas: component index out of range");
}

Vector SelectionMeas::h(const Vector& x) const {
  Vector y(obs_dim());
  for (std::size_t i = 0; i < components_.size(); ++i) y[static_cast<Index>(i)] = x[components_[i]];
  return y;
}

Vector SelectionMeas::observe(const Vector& x, Rng& rng) const {
  Vector y = h(x);
  if (tau_ > 0.0) y += tau_ * standard_normal(y.size(), rng);
  return y;
}

double SelectionMeas::log_likelihood(const Vector& x, const Vector& y_star) const {
  if (!(tau_ > 0.0)) throw Error("log_likelihood: degenerate likelihood (tau = 0)");
  if (y_star.size() != obs_dim()) throw Error("log_likelihood: observation dimension mismatch");
  return -(h(x) - y_star).squaredNorm() / (2.0 * tau_ * tau_);
}

SelectionMeas l96_observation(Index dim, double tau) {
  std::vector<Index> comps;
  for (Index j = 0; j < dim; j += 2) comps.push_back(j);
  return SelectionMeas(dim, std::move(comps), tau);
}

SelectionMeas l63_observation(double tau) { return SelectionMeas(3, {1}, tau); }

// ---------------------------------------------------------------------------

Matrix psd_sqrt(const Matrix& C, const char* name) {
  if (C.rows() != C.cols()) throw Error(std::string(name) + " must be square");
  if (!C.allFinite()) throw Error(std::string(name) + " has non-finite entries");
  const double scale = std::max(1.0, C.cwiseAbs().maxCoeff());
  if ((C - C.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw Error(std::string(name) + " is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(C);
  if (eig.info() != Eigen::Success) throw Error(std::string(name) + ": eigendecomposition failed");
  const Vector lambda = eig.eigenvalues();
  if (lambda.size() > 0 && lambda.minCoeff() < -1e-12 * scale)
    throw Error(std::string(name) + " is not positive semidefinite");
  return eig.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

LinearGaussianMeas::LinearGaussianMeas(Matrix H, Matrix R) : H_(std::move(H)), R_(std::move(R)) {
  if (R_.rows() != H_.rows()) throw Error("LinearGaussianMeas: R must be M x M with M = rows(H)");
  R_sqrt_ = psd_sqrt(R_, "R");
}

Vector LinearGaussianMeas::observe(const Vector& x, Rng& rng) const {
  return H_ * x + R_sqrt_ * standard_normal(H_.rows(), rng);
}

double LinearGaussianMeas::log_likelihood(const Vector& x, const Vector& y_star) const {
  Eigen::LLT<Matrix> llt(R_);
  if (llt.info() != Eigen::Success) throw Error("log_likelihood: degenerate likelihood (R not positive definite)");
  const Vector r = H_ * x - y_star;
  return -0.5 * r.dot(llt.solve(r));
}

LinearGaussianDynamics::LinearGaussianDynamics(Matrix A, Matrix Q) : A_(std::move(A)), Q_(std::move(Q)) {
  if (A_.rows() != A_.cols()) throw Error("LinearGaussianDynamics: A must be square");
  if (Q_.rows() != A_.rows()) throw Error("LinearGaussianDynamics: Q must match A");
  Q_sqrt_ = psd_sqrt(Q_, "Q");
}

Vector LinearGaussianDynamics::advance(const Vector& x, Rng& rng) const {
  return A_ * x + Q_sqrt_ * standard_normal(A_.rows(), rng);
}

LinearGaussianModel linear_gaussian_model(const Matrix& A, const Matrix& Q, const Matrix& H, const Matrix& R) {
  if (H.cols() != A.rows()) throw Error("linear_gaussian_model: H must have N columns");
  LinearGaussianModel m;
  m.dynamics = std::make_shared<LinearGaussianDynamics>(A, Q);
  m.measurement = std::make_shared<LinearGaussianMeas>(H, R);
  return m;
}

}  // namespace tenkf
