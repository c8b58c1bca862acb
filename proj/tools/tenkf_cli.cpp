#include "tenkf/experiments/config.hpp"
#include "tenkf/experiments/runner.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace ex = tenkf::experiments;

namespace {

enum Exit { kOk = 0, kConfigError = 1, kRuntimeError = 2 };

ex::ResolvedConfig resolve(const std::string& path, std::optional<std::uint64_t> seed, std::optional<int> replicates) {
  ex::ResolvedConfig cfg = ex::load_config(path);
  if (seed) ex::override_seed(cfg, *seed);
  if (replicates) ex::override_replicates(cfg, *replicates);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trimmed ensemble Kalman filter experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
  std::string out_dir = "results";
  int threads = 0;

  auto* run = app.add_subcommand("run", "run a scenario and write its result files");
  run->add_option("--config", config_path, "configuration file (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "master seed (overrides the file)");
  run->add_option("--out", out_dir, "output directory")->capture_default_str();
  run->add_option("--replicates", replicates, "replicate count (overrides the file)")->check(CLI::NonNegativeNumber);
  run->add_option("--threads", threads, "worker threads, 0 = all hardware threads")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  auto* validate = app.add_subcommand("validate", "check a configuration and print it with defaults filled in");
  validate->add_option("--config", config_path, "configuration file (JSON)")->required()->check(CLI::ExistingFile);
  validate->add_option("--seed", seed, "master seed (overrides the file)");
  validate->add_option("--replicates", replicates, "replicate count (overrides the file)");

  auto* list = app.add_subcommand("list-scenarios", "list the available scenarios and their defaults");
  bool show_defaults = false;
  list->add_flag("--defaults", show_defaults, "print each scenario's default parameters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*list) {
      for (const auto& s : ex::scenarios()) {
        std::cout << s.name << "\t" << s.summary << "\n";
        if (show_defaults) std::cout << ex::scenario_defaults(s.name).dump(2) << "\n";
      }
      return kOk;
    }
    const ex::ResolvedConfig cfg = resolve(config_path, seed, replicates);
    if (*validate) {
      std::cout << cfg.to_json().dump(2) << "\n";
      if (!cfg.overrides.empty()) std::cout << "overrides: " << cfg.overrides.dump() << "\n";
      return kOk;
    }
    ex::RunOptions opts;
    opts.out_dir = out_dir;
    opts.threads = threads;
    const ex::RunReport report = ex::run_scenario(cfg, opts);
    for (const auto& c : report.checks)
      std::cout << (c.passed ? "PASS " : "FAIL ") << (c.gating ? "" : "(info) ") << c.name
                << (c.replicate >= 0 ? " rep=" + std::to_string(c.replicate) : std::string())
                << (c.detail.empty() ? "" : " [" + c.detail + "]") << " value=" << c.value
                << " threshold=" << c.threshold << "\n";
    for (const auto& f : report.failures)
      std::cerr << "replicate " << f.replicate << " failed in " << f.stage << ": " << f.message << "\n";
    std::cout << "results in " << out_dir << "\n";
    return report.exit_code();
  } catch (const ex::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}
