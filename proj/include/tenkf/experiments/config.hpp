#pragma once

#include "tenkf/core.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tenkf::experiments {

using Json = nlohmann::ordered_json;

/// Version of the configuration dialect accepted by validate_config.
inline constexpr int kFormatVersion = 1;

struct ScenarioInfo {
  std::string name;
  std::string summary;
};

const std::vector<ScenarioInfo>& scenarios();

/// Fully populated parameter stanza for a scenario.
Json scenario_defaults(const std::string& scenario);

/// Every problem found in a configuration, each prefixed with its field path.
class ConfigError : public Error {
public:
  explicit ConfigError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

private:
  std::vector<std::string> issues_;
};

struct ResolvedConfig {
  std::string scenario;
  std::uint64_t seed = 1;
  /// Scenario stanza with every default filled in.
  Json params;
  /// Paths of every value that differs from its default, with the value used.
  Json overrides = Json::object();

  int replicates() const { return params.at("replicates").get<int>(); }
  /// Re-runnable configuration document.
  Json to_json() const;
};

/// Parses and checks a configuration document:
///   { "format_version": 1, "scenario": "<name>", "seed": <u64>, "<name>": { ...overrides } }
/// Unknown keys, type mismatches and range violations are all collected before throwing.
ResolvedConfig validate_config(const Json& raw);
ResolvedConfig validate_config_text(const std::string& text);

/// Reads a configuration file. A run's metadata.json is accepted too: its embedded
/// configuration is used, so a finished run can be repeated from its metadata.
ResolvedConfig load_config(const std::filesystem::path& path);

/// Applies a command-line override (seed or replicates) and records it.
void override_seed(ResolvedConfig& cfg, std::uint64_t seed);
void override_replicates(ResolvedConfig& cfg, int replicates);

}  // namespace tenkf::experiments
