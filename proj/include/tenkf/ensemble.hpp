#pragma once

#include "tenkf/core.hpp"
#include "tenkf/rng.hpp"

#include <cstdint>
#include <vector>

namespace tenkf {

/// N x n block of state vectors, one member per column.
template <typename Scalar>
struct EnsembleT {
  MatrixX<Scalar> members;

  EnsembleT() = default;
  explicit EnsembleT(MatrixX<Scalar> m) : members(std::move(m)) {}

  Index size() const { return members.cols(); }
  Index dim() const { return members.rows(); }
};

using Ensemble = EnsembleT<double>;

/// Paired forecast sample: column i of `states` and column i of `observations`
/// belong to the same member.
template <typename Scalar>
struct JointEnsembleT {
  MatrixX<Scalar> states;
  MatrixX<Scalar> observations;

  JointEnsembleT() = default;
  JointEnsembleT(MatrixX<Scalar> x, MatrixX<Scalar> y) : states(std::move(x)), observations(std::move(y)) {
    check_aligned();
  }

  Index size() const { return states.cols(); }
  Index state_dim() const { return states.rows(); }
  Index obs_dim() const { return observations.rows(); }

  void check_aligned() const {
    if (states.cols() != observations.cols())
      throw Error("joint ensemble: " + std::to_string(states.cols()) + " states but " +
                  std::to_string(observations.cols()) + " observations");
  }
};

using JointEnsemble = JointEnsembleT<double>;

/// Normalized, non-negative importance weights.
class WeightVector {
public:
  static constexpr double kNormTolerance = 1e-12;
  static constexpr double kUnderflow = 1e-300;

  /// Uniform weights over n members.
  static WeightVector uniform(Index n);
  /// Normalizes non-negative raw weights; throws if none are positive.
  static WeightVector from_unnormalized(Vector raw);
  /// Normalizes exp(log_w) with max-subtraction. -inf entries get zero weight.
  static WeightVector from_log(const Vector& log_w);

  const Vector& values() const { return w_; }
  double operator[](Index i) const { return w_[i]; }
  Index size() const { return w_.size(); }

private:
  explicit WeightVector(Vector w) : w_(std::move(w)) {}
  Vector w_;
};

struct KalmanGain {
  Matrix gain;          // N x M
  double rcond = 1.0;   // reciprocal condition estimate of the regularized C_YY
};

// ---------------------------------------------------------------------------
// Sample statistics. Columns are samples.

template <typename Derived>
VectorX<typename Derived::Scalar> sample_mean(const Eigen::MatrixBase<Derived>& x) {
  if (x.cols() == 0) throw Error("sample_mean: empty ensemble");
  return x.rowwise().mean();
}

template <typename Scalar>
VectorX<Scalar> sample_mean(const EnsembleT<Scalar>& e) {
  return sample_mean(e.members);
}

/// Unbiased (n-1) sample cross-covariance between the rows of x and the rows of y.
template <typename DerivedX, typename DerivedY>
MatrixX<typename DerivedX::Scalar> cross_covariance(const Eigen::MatrixBase<DerivedX>& x,
                                                    const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  if (x.cols() != y.cols())
    throw Error("cross_covariance: member count mismatch (" + std::to_string(x.cols()) + " vs " +
                std::to_string(y.cols()) + ")");
  if (x.cols() < 2) throw Error("cross_covariance: need at least two members");
  const MatrixX<Scalar> xc = x.colwise() - x.rowwise().mean();
  const MatrixX<Scalar> yc = y.colwise() - y.rowwise().mean();
  return (xc * yc.transpose()) / static_cast<Scalar>(x.cols() - 1);
}

/// Per-row unbiased sample standard deviation.
template <typename Derived>
VectorX<typename Derived::Scalar> sample_std(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.cols() < 2) throw Error("sample_std: need at least two members");
  const MatrixX<Scalar> xc = x.colwise() - x.rowwise().mean();
  return (xc.rowwise().squaredNorm() / static_cast<Scalar>(x.cols() - 1)).cwiseSqrt();
}

/// K = C_XY C_YY^-1 via a Cholesky-type solve of the jittered C_YY.
KalmanGain kalman_gain(const JointEnsemble& j);

/// Solve-based gain from given covariances; used by kalman_gain and the exact filter.
KalmanGain gain_from_covariances(const Matrix& cxy, const Matrix& cyy, double jitter_eps = 1e-10);

/// 1 / sum(w_i^2).
double effective_size(const WeightVector& w);

// ---------------------------------------------------------------------------
// Resampling

enum class ResampleScheme { Multinomial, Systematic };

/// Draws `count` indices; index j appears with probability w_j per draw.
std::vector<Index> resample_indices(const WeightVector& w, Index count, Rng& rng,
                                    ResampleScheme scheme = ResampleScheme::Multinomial);

/// Columns of `j` selected by `indices`, pairs kept together.
JointEnsemble gather(const JointEnsemble& j, const std::vector<Index>& indices);

/// Bootstrap resample of the joint ensemble. count < 0 keeps the input size.
JointEnsemble bootstrap_resample(const JointEnsemble& j, const WeightVector& w, Rng& rng, Index count = -1,
                                 ResampleScheme scheme = ResampleScheme::Multinomial,
                                 std::vector<Index>* chosen = nullptr);

/// FNV-1a digest of an index sequence (diagnostic only).
std::uint64_t index_digest(const std::vector<Index>& indices);

}  // namespace tenkf
