#pragma once

#include "csv.hpp"
#include "tenkf/assimilation.hpp"
#include "tenkf/experiments/runner.hpp"
#include "tenkf/parallel.hpp"

#include <string>

namespace tenkf::experiments::detail {

struct Context {
  const ResolvedConfig& cfg;
  const RunOptions& opts;
  RunReport& report;

  const Json& p() const { return cfg.params; }
  int replicates() const { return cfg.replicates(); }
  StreamKey replicate_key(int m) const { return StreamKey(cfg.seed).child(static_cast<std::uint64_t>(m)); }

  /// Registers an output file and returns its path.
  std::filesystem::path file(const std::string& name) {
    report.files.push_back(name);
    return opts.out_dir / name;
  }

  void check(std::string name, int replicate, std::string detail, double value, double threshold, bool passed,
             bool gating = true) {
    report.checks.push_back({std::move(name), replicate, std::move(detail), value, threshold, passed, gating});
  }

  void fail(int replicate, std::string stage, std::string message) {
    report.failures.push_back({replicate, std::move(stage), std::move(message)});
  }

  /// Runs body(m, inner_threads) for every replicate. Replicates share the worker pool
  /// when there are several; a single replicate gets member-level parallelism instead.
  template <typename Body>
  void for_replicates(Body&& body) {
    const int r = replicates();
    const int threads = resolve_threads(opts.threads);
    if (r > 1)
      parallel_for(r, threads, [&](long m) { body(static_cast<int>(m), 1); });
    else
      for (int m = 0; m < r; ++m) body(m, threads);
  }
};

void run_l63(Context& ctx);
void run_l96_sweep(Context& ctx);
void run_l96_aug(Context& ctx);
void run_linear_gaussian(Context& ctx);
void run_bimodal(Context& ctx);

// Shared by the two Lorenz-96 scenarios.
TwinSetup l96_twin(const Json& p, const IntegratorConfig& integrator, double dt_obs);
TrimConfig trim_config(const Json& p);
/// Sub-stream of a replicate for one (dt_obs, n) cell; independent of the grid ordering.
StreamKey cell_key(const StreamKey& replicate, double dt_obs, Index members = 0);
double median(std::vector<double> v);

}  // namespace tenkf::experiments::detail
