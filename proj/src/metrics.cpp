#include "tenkf/metrics.hpp"

#include "tenkf/ensemble.hpp"
#include "tenkf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tenkf {

double ensemble_rmse(const Matrix& members, const Vector& truth) {
  if (members.cols() == 0) throw Error("rmse: empty ensemble");
  if (members.rows() != truth.size()) throw Error("rmse: dimension mismatch");
  const double ss = (members.colwise() - truth).squaredNorm();
  return std::sqrt(ss / static_cast<double>(members.size()));
}

double mean_rmse(const Matrix& members, const Vector& truth) {
  if (members.rows() != truth.size()) throw Error("rmse: dimension mismatch");
  const Vector diff = sample_mean(members) - truth;
  return std::sqrt(diff.squaredNorm() / static_cast<double>(truth.size()));
}

double time_avg_rmse(const std::vector<double>& values) {
  if (values.empty()) throw Error("time_avg_rmse: empty series");
  double ss = 0.0;
  for (double v : values) ss += v * v;
  return std::sqrt(ss / static_cast<double>(values.size()));
}

double time_avg_rmse(const RmseSeries& s) { return time_avg_rmse(s.values); }

double RmseSeries::aggregate() const { return time_avg_rmse(values); }

WeightedSample row_sample(const Matrix& members, Index row) {
  if (row < 0 || row >= members.rows()) throw Error("row_sample: row out of range");
  std::vector<double> v(static_cast<std::size_t>(members.cols()));
  for (Index i = 0; i < members.cols(); ++i) v[static_cast<std::size_t>(i)] = members(row, i);
  return WeightedSample(std::move(v));
}

namespace {

// Sorted (value, weight) pairs with weights summing to one.
std::vector<std::pair<double, double>> sorted_sample(const WeightedSample& s) {
  if (s.values.empty()) throw Error("ks_distance: empty sample");
  if (!s.weights.empty() && s.weights.size() != s.values.size()) throw Error("ks_distance: weight count mismatch");
  std::vector<std::pair<double, double>> out(s.values.size());
  double total = 0.0;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const double w = s.weights.empty() ? 1.0 : s.weights[i];
    if (!(w >= 0.0)) throw Error("ks_distance: negative weight");
    out[i] = {s.values[i], w};
    total += w;
  }
  if (!(total > 0.0)) throw Error("ks_distance: zero total weight");
  for (auto& p : out) p.second /= total;
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

double ks_distance(const WeightedSample& a, const WeightedSample& b) {
  const auto sa = sorted_sample(a), sb = sorted_sample(b);
  std::size_t i = 0, j = 0;
  double fa = 0.0, fb = 0.0, best = 0.0;
  while (i < sa.size() || j < sb.size()) {
    double x;
    if (j >= sb.size() || (i < sa.size() && sa[i].first <= sb[j].first))
      x = sa[i].first;
    else
      x = sb[j].first;
    while (i < sa.size() && sa[i].first == x) fa += sa[i++].second;
    while (j < sb.size() && sb[j].first == x) fb += sb[j++].second;
    best = std::max(best, std::abs(fa - fb));
  }
  return best;
}

double ks_distance(const WeightedSample& a, const DensityGrid& b) {
  const auto sa = sorted_sample(a);
  const Vector cdf = b.cdf();
  auto grid_cdf = [&](double x) {
    if (x <= b.axis.lo) return 0.0;
    if (x >= b.axis.hi) return 1.0;
    const double u = (x - b.axis.lo) / b.axis.step();
    const auto k = std::min(static_cast<Index>(u), b.axis.points - 2);
    const double f = u - static_cast<double>(k);
    return (1.0 - f) * cdf[k] + f * cdf[k + 1];
  };
  double fa = 0.0, best = 0.0;
  std::size_t i = 0;
  while (i < sa.size()) {
    const double x = sa[i].first;
    const double g = grid_cdf(x);
    best = std::max(best, std::abs(fa - g));
    while (i < sa.size() && sa[i].first == x) fa += sa[i++].second;
    best = std::max(best, std::abs(fa - g));
  }
  // The grid CDF is continuous and monotone, so between jumps the sup is at an endpoint.
  return best;
}

double ks_distance(const DensityGrid& a, const WeightedSample& b) { return ks_distance(b, a); }

double ks_distance(const DensityGrid& a, const DensityGrid& b) {
  double best = 0.0;
  const Vector na = a.axis.nodes(), nb = b.axis.nodes();
  for (Index i = 0; i < na.size(); ++i) best = std::max(best, std::abs(a.cdf_at(na[i]) - b.cdf_at(na[i])));
  for (Index i = 0; i < nb.size(); ++i) best = std::max(best, std::abs(a.cdf_at(nb[i]) - b.cdf_at(nb[i])));
  return best;
}

std::vector<double> replicate_quantiles(std::vector<double> values, const std::vector<double>& qs) {
  if (values.empty()) throw Error("replicate_quantiles: no values");
  std::sort(values.begin(), values.end());
  std::vector<double> out;
  out.reserve(qs.size());
  const auto n = static_cast<double>(values.size());
  for (double q : qs) {
    if (!(q >= 0.0 && q <= 1.0)) throw Error("replicate_quantiles: quantile outside [0, 1]");
    const double pos = q * (n - 1.0);
    const auto k = static_cast<std::size_t>(std::floor(pos));
    const double f = pos - static_cast<double>(k);
    out.push_back(k + 1 < values.size() ? (1.0 - f) * values[k] + f * values[k + 1] : values[k]);
  }
  return out;
}

Histogram histogram(const std::vector<double>& values, double lo, double hi, int bins) {
  if (bins < 1) throw Error("histogram: need at least one bin");
  if (!(hi > lo)) throw Error("histogram: need hi > lo");
  if (values.empty()) throw Error("histogram: no values");
  Histogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  const double width = (hi - lo) / bins;
  for (int b = 0; b <= bins; ++b) h.edges[static_cast<std::size_t>(b)] = lo + b * width;
  h.edges.back() = hi;
  h.masses.assign(static_cast<std::size_t>(bins), 0.0);
  const double unit = 1.0 / static_cast<double>(values.size());
  for (double v : values) {
    if (!std::isfinite(v)) throw Error("histogram: non-finite value");
    const double pos = std::clamp(std::floor((v - lo) / width), 0.0, static_cast<double>(bins - 1));
    const auto b = static_cast<int>(pos);
    h.masses[static_cast<std::size_t>(b)] += unit;
  }
  return h;
}

double sign_test_pvalue(int wins, int trials) {
  if (trials < 0 || wins < 0 || wins > trials) throw Error("sign_test_pvalue: need 0 <= wins <= trials");
  // sum_{k >= wins} C(trials, k) / 2^trials, in log space.
  double p = 0.0;
  for (int k = wins; k <= trials; ++k)
    p += std::exp(std::lgamma(trials + 1.0) - std::lgamma(k + 1.0) - std::lgamma(trials - k + 1.0) -
                  trials * std::log(2.0));
  return std::min(p, 1.0);
}

}  // namespace tenkf
