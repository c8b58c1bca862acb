#include "tenkf/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace tenkf {

WeightVector WeightVector::uniform(Index n) {
  if (n < 1) throw Error("WeightVector::uniform: need at least one member");
  return WeightVector(Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

WeightVector WeightVector::from_unnormalized(Vector raw) {
  if (raw.size() == 0) throw Error("WeightVector: empty");
  for (Index i = 0; i < raw.size(); ++i) {
    if (!(raw[i] >= 0.0) || !std::isfinite(raw[i]))
      throw Error("WeightVector: weight " + std::to_string(i) + " is negative or non-finite");
  }
  const double total = raw.sum();
  if (!(total > 0.0)) throw Error("WeightVector: all weights are zero");
  raw /= total;
  for (Index i = 0; i < raw.size(); ++i)
    if (raw[i] < kUnderflow) raw[i] = 0.0;
  raw /= raw.sum();
  return WeightVector(std::move(raw));
}

WeightVector WeightVector::from_log(const Vector& log_w) {
  if (log_w.size() == 0) throw Error("WeightVector: empty");
  double top = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < log_w.size(); ++i) {
    if (std::isnan(log_w[i]) || log_w[i] == std::numeric_limits<double>::infinity())
      throw Error("WeightVector: log-weight " + std::to_string(i) + " is NaN or +inf");
    top = std::max(top, log_w[i]);
  }
  if (top == -std::numeric_limits<double>::infinity())
    throw Error("WeightVector: every log-weight is -inf");
  Vector w(log_w.size());
  for (Index i = 0; i < w.size(); ++i) w[i] = std::exp(log_w[i] - top);
  return from_unnormalized(std::move(w));
}

KalmanGain gain_from_covariances(const Matrix& cxy, const Matrix& cyy, double jitter_eps) {
  const Index m = cyy.rows();
  if (cyy.cols() != m || cxy.cols() != m) throw Error("kalman_gain: covariance shape mismatch");
  if (!cxy.allFinite() || !cyy.allFinite()) throw Error("kalman_gain: non-finite covariance");

  const double trace = cyy.trace();
  Matrix reg = cyy;
  reg.diagonal().array() += jitter_eps * trace / static_cast<double>(m);

  Eigen::LDLT<Matrix> ldlt(reg);
  const double rcond = ldlt.info() == Eigen::Success ? ldlt.rcond() : 0.0;
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || !(trace > 0.0) || !(rcond > 1e-15)) {
    std::ostringstream msg;
    msg << "kalman_gain: observed-forecast covariance is singular (trace " << trace << ", rcond " << rcond << ")";
    throw SingularMatrixError(msg.str(), rcond);
  }
  // K C_YY = C_XY  <=>  C_YY K^T = C_XY^T
  KalmanGain out;
  out.gain = ldlt.solve(cxy.transpose()).transpose();
  out.rcond = rcond;
  if (!out.gain.allFinite()) throw SingularMatrixError("kalman_gain: non-finite gain", rcond);
  return out;
}

KalmanGain kalman_gain(const JointEnsemble& j) {
  j.check_aligned();
  if (j.size() < 2) throw Error("kalman_gain: need at least two members");
  return gain_from_covariances(cross_covariance(j.states, j.observations),
                               cross_covariance(j.observations, j.observations));
}

double effective_size(const WeightVector& w) {
  const Vector& v = w.values();
  // Equal weights give exactly n, free of summation rounding.
  if (v.size() > 0 && v.maxCoeff() == v.minCoeff()) return static_cast<double>(v.size());
  return 1.0 / v.squaredNorm();
}

std::vector<Index> resample_indices(const WeightVector& w, Index count, Rng& rng, ResampleScheme scheme) {
  std::vector<Index> out(static_cast<std::size_t>(count));
  const Vector& p = w.values();
  if (scheme == ResampleScheme::Multinomial) {
    std::discrete_distribution<Index> pick(p.data(), p.data() + p.size());
    for (auto& idx : out) idx = pick(rng);
    return out;
  }
  // Systematic: one uniform offset, evenly spaced pointers through the CDF.
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double step = 1.0 / static_cast<double>(count);
  double u = unif(rng) * step;
  double cdf = p[0];
  Index j = 0;
  for (Index i = 0; i < count; ++i) {
    while (u > cdf && j + 1 < p.size()) cdf += p[++j];
    out[static_cast<std::size_t>(i)] = j;
    u += step;
  }
  return out;
}

JointEnsemble gather(const JointEnsemble& j, const std::vector<Index>& indices) {
  JointEnsemble out;
  out.states.resize(j.state_dim(), static_cast<Index>(indices.size()));
  out.observations.resize(j.obs_dim(), static_cast<Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.states.col(static_cast<Index>(i)) = j.states.col(indices[i]);
    out.observations.col(static_cast<Index>(i)) = j.observations.col(indices[i]);
  }
  return out;
}

JointEnsemble bootstrap_resample(const JointEnsemble& j, const WeightVector& w, Rng& rng, Index count,
                                 ResampleScheme scheme, std::vector<Index>* chosen) {
  j.check_aligned();
  if (w.size() != j.size()) throw Error("bootstrap_resample: weight count does not match ensemble size");
  auto indices = resample_indices(w, count < 0 ? j.size() : count, rng, scheme);
  auto out = gather(j, indices);
  if (chosen) *chosen = std::move(indices);
  return out;
}

std::uint64_t index_digest(const std::vector<Index>& indices) {
  std::uint64_t h = 1469598103934665603ULL;
  for (Index i : indices) {
    auto v = static_cast<std::uint64_t>(i);
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffU;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace tenkf
