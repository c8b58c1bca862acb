#pragma once

#include "tenkf/core.hpp"
#include "tenkf/rng.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace tenkf {

/// Continuous-time forecast model dx = f(x, t) dt + sigma dW.
/// The drift is deterministic; noise is injected by the integrator.
class DynModel {
public:
  virtual ~DynModel() = default;
  virtual Index state_dim() const = 0;
  virtual void drift(const Eigen::Ref<const Vector>& x, double t, Eigen::Ref<Vector> dxdt) const = 0;
  /// Per-component white-noise standard deviation.
  virtual double noise_intensity() const = 0;

  Vector drift(const Vector& x, double t = 0.0) const {
    Vector out(x.size());
    drift(x, t, out);
    return out;
  }
};

struct Lorenz63Params {
  double alpha = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
  double sigma = 0.01;

  void validate() const;
};

struct Lorenz96Params {
  Index dim = 36;
  double forcing = 8.0;
  double sigma = 0.01;
  /// Canonical -x_j damping term. Disable for the undamped variant.
  bool include_damping = true;

  void validate() const;
};

Vector l63_drift(const Vector& x, const Lorenz63Params& p);
Vector l96_drift(const Vector& x, const Lorenz96Params& p);

class Lorenz63 final : public DynModel {
public:
  explicit Lorenz63(Lorenz63Params p);
  Index state_dim() const override { return 3; }
  void drift(const Eigen::Ref<const Vector>& x, double t, Eigen::Ref<Vector> dxdt) const override;
  double noise_intensity() const override { return p_.sigma; }
  const Lorenz63Params& params() const { return p_; }
  using DynModel::drift;

private:
  Lorenz63Params p_;
};

class Lorenz96 final : public DynModel {
public:
  explicit Lorenz96(Lorenz96Params p);
  Index state_dim() const override { return p_.dim; }
  void drift(const Eigen::Ref<const Vector>& x, double t, Eigen::Ref<Vector> dxdt) const override;
  double noise_intensity() const override { return p_.sigma; }
  const Lorenz96Params& params() const { return p_; }
  using DynModel::drift;

private:
  Lorenz96Params p_;
};

/// Drift given as a callable; handy for scalar test problems.
class FunctionModel final : public DynModel {
public:
  using DriftFn = std::function<void(const Eigen::Ref<const Vector>&, double, Eigen::Ref<Vector>)>;
  FunctionModel(Index dim, DriftFn f, double sigma) : dim_(dim), f_(std::move(f)), sigma_(sigma) {}
  Index state_dim() const override { return dim_; }
  void drift(const Eigen::Ref<const Vector>& x, double t, Eigen::Ref<Vector> dxdt) const override { f_(x, t, dxdt); }
  double noise_intensity() const override { return sigma_; }
  using DynModel::drift;

private:
  Index dim_;
  DriftFn f_;
  double sigma_;
};

// ---------------------------------------------------------------------------
// Measurement models: y = h(x) + v.

class MeasModel {
public:
  virtual ~MeasModel() = default;
  virtual Index obs_dim() const = 0;
  virtual Index state_dim() const = 0;
  virtual Vector h(const Vector& x) const = 0;
  virtual Vector observe(const Vector& x, Rng& rng) const = 0;
  /// log p(y* | x) up to an additive constant shared by all x.
  virtual double log_likelihood(const Vector& x, const Vector& y_star) const = 0;
};

/// Direct observation of selected components with i.i.d. N(0, tau^2) noise.
class SelectionMeas final : public MeasModel {
public:
  SelectionMeas(Index state_dim, std::vector<Index> components, double tau);

  Index obs_dim() const override { return static_cast<Index>(components_.size()); }
  Index state_dim() const override { return state_dim_; }
  Vector h(const Vector& x) const override;
  Vector observe(const Vector& x, Rng& rng) const override;
  double log_likelihood(const Vector& x, const Vector& y_star) const override;

  double tau() const { return tau_; }
  const std::vector<Index>& components() const { return components_; }

private:
  Index state_dim_;
  std::vector<Index> components_;
  double tau_;
};

/// Odd-indexed components x_1, x_3, ..., x_{N-1} (zero-based 0, 2, ...).
SelectionMeas l96_observation(Index dim, double tau);
/// Second component x_2 of the Lorenz-63 state.
SelectionMeas l63_observation(double tau);

// ---------------------------------------------------------------------------
// Linear-Gaussian reference model: x' = A x + w, y = H x + v.

class LinearGaussianMeas final : public MeasModel {
public:
  LinearGaussianMeas(Matrix H, Matrix R);

  Index obs_dim() const override { return H_.rows(); }
  Index state_dim() const override { return H_.cols(); }
  Vector h(const Vector& x) const override { return H_ * x; }
  Vector observe(const Vector& x, Rng& rng) const override;
  double log_likelihood(const Vector& x, const Vector& y_star) const override;

  const Matrix& H() const { return H_; }
  const Matrix& R() const { return R_; }

private:
  Matrix H_, R_, R_sqrt_;
};

class LinearGaussianDynamics {
public:
  LinearGaussianDynamics(Matrix A, Matrix Q);

  Index state_dim() const { return A_.rows(); }
  /// One application of the transition map.
  Vector advance(const Vector& x, Rng& rng) const;

  const Matrix& A() const { return A_; }
  const Matrix& Q() const { return Q_; }

private:
  Matrix A_, Q_, Q_sqrt_;
};

struct LinearGaussianModel {
  std::shared_ptr<const LinearGaussianDynamics> dynamics;
  std::shared_ptr<const LinearGaussianMeas> measurement;
};

/// Validates shapes and positive semidefiniteness of Q and R.
LinearGaussianModel linear_gaussian_model(const Matrix& A, const Matrix& Q, const Matrix& H, const Matrix& R);

/// Symmetric square root S (S S^T = C) of a PSD matrix; throws if C is not PSD.
Matrix psd_sqrt(const Matrix& C, const char* name);

}  // namespace tenkf
