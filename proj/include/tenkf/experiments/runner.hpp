#pragma once

#include "tenkf/experiments/config.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace tenkf::experiments {

/// Pinned pass/fail tolerances of the built-in checks.
namespace tolerance {
inline constexpr double kKalmanStdErrors = 4.0;     // linear-Gaussian moments vs exact filter
inline constexpr double kZeroTrimKs = 1e-4;         // limit density at huge lambda vs EnKF limit
inline constexpr double kFullTrimKs = 0.02;         // limit density at tiny lambda vs Bayes posterior
inline constexpr double kEnkfBiasKs = 0.05;         // EnKF limit must differ from the posterior on the toy
inline constexpr double kTenkfSampleKs = 0.03;      // sampled TEnKF vs its limit density
inline constexpr double kPfSampleKs = 0.02;         // sampled PF vs Bayes posterior
inline constexpr double kL63KsRatio = 0.5;          // KS(TEnKF at smallest lambda) / KS(EnKF), both to PF
inline constexpr double kSignTestAlpha = 0.05;      // one-sided paired sign test level
}  // namespace tolerance

struct Check {
  std::string name;
  int replicate = -1;  ///< -1 for checks over all replicates
  std::string detail;  ///< free-form qualifier (filter, dt_obs, ...)
  double value = 0.0;
  double threshold = 0.0;
  bool passed = false;
  bool gating = true;
};

struct Failure {
  int replicate = -1;
  std::string stage;
  std::string message;
};

struct RunReport {
  std::vector<Check> checks;
  std::vector<Failure> failures;
  std::vector<std::string> files;

  bool gating_passed() const;
  /// 0 ok, 2 runtime failure recorded, 3 gating check failed.
  int exit_code() const;
  const Check* find(const std::string& name, const std::string& detail = {}, int replicate = -1) const;
};

struct RunOptions {
  std::filesystem::path out_dir = "results";
  int threads = 1;  ///< 0 = one per hardware thread
};

/// Runs the configured scenario and writes its result files, checks.csv,
/// failures.csv, metadata.json and resolved_config.json into opts.out_dir.
RunReport run_scenario(const ResolvedConfig& cfg, const RunOptions& opts);

/// Version string recorded in run metadata.
const char* code_version();

}  // namespace tenkf::experiments
