#include "scenarios.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#ifndef TENKF_VERSION
#define TENKF_VERSION "unknown"
#endif

namespace tenkf::experiments {

const char* code_version() { return TENKF_VERSION; }

bool RunReport::gating_passed() const {
  for (const auto& c : checks)
    if (c.gating && !c.passed) return false;
  return true;
}

int RunReport::exit_code() const {
  if (!failures.empty()) return 2;
  return gating_passed() ? 0 : 3;
}

const Check* RunReport::find(const std::string& name, const std::string& detail, int replicate) const {
  for (const auto& c : checks)
    if (c.name == name && c.replicate == replicate && (detail.empty() || c.detail == detail)) return &c;
  return nullptr;
}

namespace {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

RunReport run_scenario(const ResolvedConfig& cfg, const RunOptions& opts) {
  std::error_code ec;
  std::filesystem::create_directories(opts.out_dir, ec);
  if (ec) throw Error("cannot create output directory " + opts.out_dir.string() + ": " + ec.message());

  const auto started = std::chrono::steady_clock::now();
  const std::string started_utc = utc_now();
  RunReport report;
  detail::Context ctx{cfg, opts, report};

  if (cfg.replicates() > 0) {
    if (cfg.scenario == "l63-limit-dist")
      detail::run_l63(ctx);
    else if (cfg.scenario == "l96-rmse-sweep")
      detail::run_l96_sweep(ctx);
    else if (cfg.scenario == "l96-adaptive-aug")
      detail::run_l96_aug(ctx);
    else if (cfg.scenario == "linear-gaussian-check")
      detail::run_linear_gaussian(ctx);
    else if (cfg.scenario == "bimodal-oracle-check")
      detail::run_bimodal(ctx);
    else
      throw Error("unknown scenario \"" + cfg.scenario + "\"");

    {
      CsvWriter checks(ctx.file("checks.csv"),
                       {"check", "replicate", "detail", "value", "threshold", "passed", "gating"});
      for (const auto& c : report.checks)
        checks.row(c.name, c.replicate, c.detail, c.value, c.threshold, c.passed ? 1 : 0, c.gating ? 1 : 0);
    }
    {
      CsvWriter failures(ctx.file("failures.csv"), {"replicate", "stage", "message"});
      for (const auto& f : report.failures) {
        std::string msg = f.message;
        for (char& ch : msg)
          if (ch == ',' || ch == '\n') ch = ';';
        failures.row(f.replicate, f.stage, msg);
      }
    }
    write_json(ctx.file("resolved_config.json"), cfg.to_json());
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  Json meta = Json::object();
  meta["format_version"] = kFormatVersion;
  meta["scenario"] = cfg.scenario;
  meta["seed"] = cfg.seed;
  meta["replicates"] = cfg.replicates();
  meta["threads"] = resolve_threads(opts.threads);
  meta["code_version"] = code_version();
  meta["started_utc"] = started_utc;
  meta["wall_clock_seconds"] = wall;
  meta["config"] = cfg.to_json();
  meta["overrides"] = cfg.overrides;
  int passed = 0, failed = 0;
  for (const auto& c : report.checks) (c.passed ? passed : failed) += 1;
  meta["checks"] = {{"passed", passed}, {"failed", failed}, {"gating_passed", report.gating_passed()}};
  meta["failures"] = report.failures.size();
  meta["exit_code"] = report.exit_code();
  report.files.push_back("metadata.json");
  meta["files"] = report.files;
  write_json(opts.out_dir / "metadata.json", meta);
  return report;
}

}  // namespace tenkf::experiments
