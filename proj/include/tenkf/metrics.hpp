#pragma once

#include "tenkf/core.hpp"

#include <vector>

namespace tenkf {

struct DensityGrid;

/// Root-mean-square distance of every member (and every component) from the truth.
double ensemble_rmse(const Matrix& members, const Vector& truth);
/// RMSE of the ensemble mean only.
double mean_rmse(const Matrix& members, const Vector& truth);

/// Per-step RMSE values and their time aggregate.
struct RmseSeries {
  std::vector<double> times;
  std::vector<double> values;

  double aggregate() const;
};

/// sqrt(mean(values^2)); throws on an empty series.
double time_avg_rmse(const std::vector<double>& values);
double time_avg_rmse(const RmseSeries& s);

/// 1-D sample with optional weights (empty weights = equal weights).
struct WeightedSample {
  std::vector<double> values;
  std::vector<double> weights;

  WeightedSample() = default;
  WeightedSample(std::vector<double> v) : values(std::move(v)) {}  // NOLINT(implicit)
  WeightedSample(std::vector<double> v, std::vector<double> w) : values(std::move(v)), weights(std::move(w)) {}
};

WeightedSample row_sample(const Matrix& members, Index row);

/// Kolmogorov-Smirnov distance sup |F_a - F_b|.
double ks_distance(const WeightedSample& a, const WeightedSample& b);
double ks_distance(const WeightedSample& a, const DensityGrid& b);
double ks_distance(const DensityGrid& a, const WeightedSample& b);
double ks_distance(const DensityGrid& a, const DensityGrid& b);

/// Linear interpolation between order statistics: position q * (n - 1).
std::vector<double> replicate_quantiles(std::vector<double> values, const std::vector<double>& qs = {0.25, 0.5, 0.75});

struct Histogram {
  std::vector<double> edges;   // bins + 1
  std::vector<double> masses;  // sums to one
};

/// Equal-width histogram over [lo, hi]; values outside are clamped into the end bins.
Histogram histogram(const std::vector<double>& values, double lo, double hi, int bins);

/// One-sided sign test: P(X >= wins) for X ~ Binomial(trials, 1/2).
double sign_test_pvalue(int wins, int trials);

}  // namespace tenkf
