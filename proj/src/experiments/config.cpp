#include "tenkf/experiments/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

namespace tenkf::experiments {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Kind { Real, Integer, Bool, Text, RealList, IntegerList, TextList };

struct Param {
  std::string name;
  Kind kind;
  Json value;
  double min = -kInf;
  bool strict_min = false;
  double max = kInf;
  std::vector<std::string> choices = {};
};

Param real(std::string n, double v, double min = -kInf, bool strict = false, double max = kInf) {
  return {std::move(n), Kind::Real, v, min, strict, max};
}
Param positive(std::string n, double v) { return real(std::move(n), v, 0.0, true); }
Param nonneg(std::string n, double v) { return real(std::move(n), v, 0.0, false); }
Param integer(std::string n, long v, double min) { return {std::move(n), Kind::Integer, v, min}; }
Param flag(std::string n, bool v) { return {std::move(n), Kind::Bool, v}; }
Param text(std::string n, std::string v, std::vector<std::string> choices) {
  return {std::move(n), Kind::Text, std::move(v), -kInf, false, kInf, std::move(choices)};
}
Param reals(std::string n, std::vector<double> v, double min = 0.0, bool strict = true) {
  return {std::move(n), Kind::RealList, v, min, strict};
}
Param integers(std::string n, std::vector<long> v, double min) { return {std::move(n), Kind::IntegerList, v, min}; }
Param texts(std::string n, std::vector<std::string> v, std::vector<std::string> choices) {
  return {std::move(n), Kind::TextList, v, -kInf, false, kInf, std::move(choices)};
}

void add_trim(std::vector<Param>& p) {
  p.push_back(positive("target_ne", 50.0));
  p.push_back(text("distance", "normalized-l1", {"normalized-l1", "max-abs"}));
  p.push_back(positive("ne_tolerance", 0.05));
  p.push_back(positive("lambda_min", 1e-6));
  p.push_back(positive("lambda_max", 1e6));
  p.push_back(integer("max_bisect_iters", 60, 1));
  p.push_back(flag("trimmed_gain", false));
}

void add_l96(std::vector<Param>& p) {
  p.push_back(integer("dim", 36, 4));
  p.push_back(real("forcing", 8.0));
  p.push_back(flag("damping", true));
  p.push_back(positive("tau", 0.05));
  p.push_back(real("mu0", 1.0));
  p.push_back(real("mu1", 0.1));
  p.push_back(nonneg("sigma0", 0.01));
}

std::vector<Param> schema(const std::string& scenario) {
  std::vector<Param> p;
  if (scenario == "l63-limit-dist") {
    p = {positive("alpha", 10.0),  positive("rho", 28.0),       positive("beta", 8.0 / 3.0),
         nonneg("sigma", 0.01),    positive("tau", 0.2),        positive("t1", 1.0),
         positive("dt", 0.01),     integer("members", 100000, 2), real("x1_0", 1.5),
         real("x3_0", 25.0),       nonneg("sigma1_0", 0.1),     nonneg("sigma3_0", 0.1),
         real("x2_truth_center", 0.0), reals("lambda_grid", {10.0, 1.0, 0.3, 0.1, 0.03}),
         integer("hist_bins", 100, 1), integer("replicates", 1, 0)};
  } else if (scenario == "l96-rmse-sweep") {
    add_l96(p);
    p.push_back(nonneg("t_final", 15.0));
    p.push_back(reals("dt_obs", {0.9}));
    p.push_back(positive("dt", 0.01));
    p.push_back(nonneg("sigma", 0.01));
    p.push_back(integers("members", {4000}, 2));
    add_trim(p);
    p.push_back(texts("filters", {"EnKF", "TEnKF"}, {"EnKF", "TEnKF", "PF"}));
    p.push_back(integer("replicates", 30, 0));
    p.push_back(nonneg("gate_dt_obs_min", 0.8));
  } else if (scenario == "l96-adaptive-aug") {
    add_l96(p);
    p.push_back(nonneg("t_final", 32.0));
    p.push_back(reals("dt_obs", {0.8}));
    p.push_back(text("integrator", "rk45", {"rk45", "rk4", "heun"}));
    p.push_back(positive("dt", 0.01));
    p.push_back(positive("rtol", 1e-6));
    p.push_back(positive("atol", 1e-9));
    p.push_back(nonneg("sigma", 0.0));
    p.push_back(integer("members", 200, 2));
    add_trim(p);
    p.push_back(real("r_max", 3.0, 1.0));
    p.push_back(positive("d_max", 3.0));
    p.push_back(nonneg("sigma_p", 0.4));
    p.push_back(integer("replicates", 10, 0));
    p.push_back(nonneg("gate_dt_obs_min", 0.8));
  } else if (scenario == "linear-gaussian-check") {
    p = {real("a", 1.0),          nonneg("q", 0.01),           real("h", 1.0),
         positive("r", 0.04),     integer("steps", 5, 1),      integer("members", 100000, 2),
         real("prior_mean", 0.0), positive("prior_var", 1.0),  positive("lambda", 1.0),
         integer("replicates", 1, 0)};
  } else if (scenario == "bimodal-oracle-check") {
    p = {positive("mode", 2.0),          positive("mode_var", 0.25),      positive("noise_var", 0.25),
         real("y_star", 1.5),            integer("grid_points", 2048, 16), integer("members", 100000, 2),
         reals("lambda_grid", {10.0, 1.0, 0.3, 0.1, 0.03}), positive("lambda_large", 1e9),
         positive("lambda_small", 1e-4), positive("sample_lambda", 0.3), integer("replicates", 1, 0)};
  }
  return p;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::optional<std::string> check_number(const Param& p, double v) {
  if (!std::isfinite(v)) return "must be finite";
  if (p.strict_min ? !(v > p.min) : !(v >= p.min))
    return std::string("must be ") + (p.strict_min ? "> " : ">= ") + fmt(p.min) + ", got " + fmt(v);
  if (v > p.max) return "must be <= " + fmt(p.max) + ", got " + fmt(v);
  return std::nullopt;
}

// Appends problems with `v` against `p` to `issues`; `path` names the field.
void check_value(const Param& p, const Json& v, const std::string& path, std::vector<std::string>& issues) {
  auto scalar = [&](const Json& x, const std::string& where, Kind k) {
    switch (k) {
      case Kind::Real:
        if (!x.is_number()) return issues.push_back(where + ": expected a number");
        if (auto e = check_number(p, x.get<double>())) issues.push_back(where + ": " + *e);
        return;
      case Kind::Integer:
        if (!x.is_number_integer()) return issues.push_back(where + ": expected an integer");
        if (auto e = check_number(p, static_cast<double>(x.get<long>()))) issues.push_back(where + ": " + *e);
        return;
      case Kind::Bool:
        if (!x.is_boolean()) issues.push_back(where + ": expected true or false");
        return;
      case Kind::Text: {
        if (!x.is_string()) return issues.push_back(where + ": expected a string");
        const auto s = x.get<std::string>();
        if (!p.choices.empty() && std::find(p.choices.begin(), p.choices.end(), s) == p.choices.end()) {
          std::string opts;
          for (const auto& c : p.choices) opts += (opts.empty() ? "" : ", ") + c;
          issues.push_back(where + ": unknown value \"" + s + "\" (expected one of " + opts + ")");
        }
        return;
      }
      default:
        return;
    }
  };
  switch (p.kind) {
    case Kind::RealList:
    case Kind::IntegerList:
    case Kind::TextList: {
      if (!v.is_array()) return issues.push_back(path + ": expected a list");
      if (v.empty()) return issues.push_back(path + ": must not be empty");
      const Kind elem = p.kind == Kind::RealList ? Kind::Real : p.kind == Kind::IntegerList ? Kind::Integer : Kind::Text;
      for (std::size_t i = 0; i < v.size(); ++i) scalar(v[i], path + "[" + std::to_string(i) + "]", elem);
      return;
    }
    default:
      scalar(v, path, p.kind);
  }
}

double min_of(const Json& v) {
  if (!v.is_array()) return v.get<double>();
  double m = kInf;
  for (const auto& x : v) m = std::min(m, x.get<double>());
  return m;
}

void cross_checks(const std::string& sc, const Json& p, std::vector<std::string>& issues) {
  const std::string at = sc + ".";
  if (p.contains("target_ne") && p.contains("members")) {
    const double ne = p["target_ne"].get<double>();
    const double n = min_of(p["members"]);
    if (ne > n)
      issues.push_back(at + "target_ne: " + fmt(ne) + " exceeds " + at + "members (" + fmt(n) +
                       "); the target effective size must not exceed the ensemble size");
    if (ne < 1.0) issues.push_back(at + "target_ne: must be >= 1");
  }
  if (p.contains("lambda_min") && p.contains("lambda_max") &&
      !(p["lambda_min"].get<double>() < p["lambda_max"].get<double>()))
    issues.push_back(at + "lambda_min: must be below " + at + "lambda_max");
  if (p.contains("integrator") && p["integrator"] != "heun" && p["sigma"].get<double>() > 0.0)
    issues.push_back(at + "integrator: \"" + p["integrator"].get<std::string>() + "\" is deterministic but " + at +
                     "sigma is " + fmt(p["sigma"].get<double>()) + " (use heun or sigma = 0)");
}

bool is_known(const std::string& scenario) {
  const auto& all = scenarios();
  return std::any_of(all.begin(), all.end(), [&](const ScenarioInfo& s) { return s.name == scenario; });
}

}  // namespace

const std::vector<ScenarioInfo>& scenarios() {
  static const std::vector<ScenarioInfo> all = {
      {"l63-limit-dist", "Lorenz-63 SDE single update: EnKF, PF and TEnKF over a lambda sweep"},
      {"l96-rmse-sweep", "stochastic Lorenz-96 twin experiments: time-averaged RMSE of EnKF vs TEnKF"},
      {"l96-adaptive-aug", "deterministic Lorenz-96 with TEnKF ensemble augmentation"},
      {"linear-gaussian-check", "scalar linear-Gaussian model against the exact Kalman filter"},
      {"bimodal-oracle-check", "1-D bimodal toy against quadrature limit densities"},
  };
  return all;
}

Json scenario_defaults(const std::string& scenario) {
  if (!is_known(scenario)) throw Error("unknown scenario \"" + scenario + "\"");
  Json out = Json::object();
  for (const auto& p : schema(scenario)) out[p.name] = p.value;
  return out;
}

ConfigError::ConfigError(std::vector<std::string> issues)
    : Error([&] {
        std::string msg = "invalid configuration:";
        for (const auto& i : issues) msg += "\n  " + i;
        return msg;
      }()),
      issues_(std::move(issues)) {}

Json ResolvedConfig::to_json() const {
  Json j = Json::object();
  j["format_version"] = kFormatVersion;
  j["scenario"] = scenario;
  j["seed"] = seed;
  j[scenario] = params;
  return j;
}

ResolvedConfig validate_config(const Json& raw) {
  std::vector<std::string> issues;
  if (!raw.is_object()) throw ConfigError({"<root>: expected an object"});

  ResolvedConfig cfg;
  if (!raw.contains("format_version")) {
    issues.push_back("format_version: required (current version is " + std::to_string(kFormatVersion) + ")");
  } else if (!raw["format_version"].is_number_integer() || raw["format_version"].get<long>() != kFormatVersion) {
    issues.push_back("format_version: unsupported (expected " + std::to_string(kFormatVersion) + ")");
  }

  if (!raw.contains("scenario") || !raw["scenario"].is_string()) {
    issues.push_back("scenario: required string");
  } else {
    cfg.scenario = raw["scenario"].get<std::string>();
    if (!is_known(cfg.scenario)) issues.push_back("scenario: unknown scenario \"" + cfg.scenario + "\"");
  }

  if (raw.contains("seed")) {
    const auto& s = raw["seed"];
    if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() && s.get<long long>() < 0))
      issues.push_back("seed: expected a non-negative integer");
    else
      cfg.seed = s.get<std::uint64_t>();
  }

  for (const auto& [key, value] : raw.items()) {
    if (key == "format_version" || key == "scenario" || key == "seed") continue;
    if (!is_known(key)) {
      issues.push_back(key + ": unknown key");
      continue;
    }
    if (!value.is_object()) {
      issues.push_back(key + ": expected an object");
      continue;
    }
    // Stanzas for other scenarios are checked too, so a shared file stays valid for all.
    const auto table = schema(key);
    Json merged = scenario_defaults(key);
    for (const auto& [name, v] : value.items()) {
      const auto it = std::find_if(table.begin(), table.end(), [&](const Param& p) { return p.name == name; });
      const std::string path = key + "." + name;
      if (it == table.end()) {
        issues.push_back(path + ": unknown key");
        continue;
      }
      const auto before = issues.size();
      check_value(*it, v, path, issues);
      if (issues.size() == before) {
        merged[name] = v;
        if (key == cfg.scenario && v != it->value) cfg.overrides[path] = v;
      }
    }
    if (key == cfg.scenario) cfg.params = merged;
    cross_checks(key, merged, issues);
  }
  if (!cfg.scenario.empty() && is_known(cfg.scenario) && cfg.params.is_null()) {
    cfg.params = scenario_defaults(cfg.scenario);
    cross_checks(cfg.scenario, cfg.params, issues);
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

ResolvedConfig validate_config_text(const std::string& text) {
  Json raw;
  try {
    raw = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError({std::string("<document>: not valid JSON: ") + e.what()});
  }
  return validate_config(raw);
}

ResolvedConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path.string() + ": cannot open"});
  Json raw;
  try {
    raw = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError({path.string() + ": not valid JSON: " + e.what()});
  }
  if (raw.is_object() && raw.contains("code_version") && raw.contains("config") && raw["config"].is_object())
    return validate_config(raw["config"]);
  return validate_config(raw);
}

void override_seed(ResolvedConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.overrides["seed"] = seed;
}

void override_replicates(ResolvedConfig& cfg, int replicates) {
  if (replicates < 0) throw ConfigError({"replicates: must be >= 0"});
  cfg.params["replicates"] = replicates;
  const Json def = scenario_defaults(cfg.scenario)["replicates"];
  const std::string path = cfg.scenario + ".replicates";
  if (def != Json(replicates))
    cfg.overrides[path] = replicates;
  else
    cfg.overrides.erase(path);
}

}  // namespace tenkf::experiments
