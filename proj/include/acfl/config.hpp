#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "acfl/coding.hpp"
#include "acfl/errors.hpp"
#include "acfl/privacy.hpp"
#include "acfl/training.hpp"

namespace acfl {

/// How the server weights the coded gradient. Oracle bounds left unset are
/// estimated per replicate from a dry run (see harness).
struct PolicySpec {
  enum class Kind { fixed, adaptive_oracle, adaptive_estimated };
  Kind kind = Kind::adaptive_estimated;
  double alpha = 0.5;
  std::optional<double> beta_sq;
  std::optional<double> c_sq;
  double fallback_alpha = 1.0;

  bool operator==(const PolicySpec&) const = default;
};

/// A named comparison baseline run against ACFL on paired seeds.
struct BaselineSpec {
  std::string name = "NA";
  PolicySpec policy{PolicySpec::Kind::fixed, 0.5, std::nullopt, std::nullopt, 1.0};

  bool operator==(const BaselineSpec&) const = default;
};

struct ScheduleSpec {
  enum class Kind { paper_decay, theorem };
  Kind kind = Kind::paper_decay;
  double c = 1e-4;
  /// Theorem mode only; unset means eig_min(Σ XᵢᵀXᵢ) of each replicate's data.
  std::optional<double> lambda;

  bool operator==(const ScheduleSpec&) const = default;
};

struct TradeoffSpec {
  double beta_sq = 100.0;
  double c_sq = 1.0;
  double lambda = 1.0;
  double sigma_min = 1e-2;
  double sigma_max = 1e4;
  std::size_t sigma_points = 61;
  std::vector<double> fixed_alphas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};

  bool operator==(const TradeoffSpec&) const = default;
};

struct ExperimentConfig {
  // dataset
  std::size_t n_devices = 100;
  std::size_t samples_per_device = 100;
  std::size_t d = 10;
  std::size_t o = 10;
  double label_noise_var = 0.0;

  double straggler_p = 0.2;
  /// Exactly one of these is set after validation.
  std::optional<NoiseParams> noise = NoiseParams::equal(0.1);
  std::optional<double> target_epsilon;

  PolicySpec policy;
  ScheduleSpec schedule;
  std::size_t steps = 2000;
  std::uint64_t seed = 1;
  std::size_t replicates = 20;
  /// Worker threads for replicates; 0 means hardware concurrency.
  std::size_t threads = 1;
  std::string output_dir = "out";

  std::vector<double> compare_noise_levels{0.1, 10.0};
  std::vector<BaselineSpec> baselines{BaselineSpec{}};

  TradeoffSpec tradeoff;

  /// Noise variances actually used (resolves target_epsilon).
  NoiseParams resolved_noise() const {
    if (target_epsilon) return sigma_for_epsilon({*target_epsilon}, d, o);
    return noise.value_or(NoiseParams{});
  }

  void validate() const;

  bool operator==(const ExperimentConfig& o2) const {
    return n_devices == o2.n_devices && samples_per_device == o2.samples_per_device &&
           d == o2.d && o == o2.o && label_noise_var == o2.label_noise_var &&
           straggler_p == o2.straggler_p && noise.has_value() == o2.noise.has_value() &&
           (!noise || (noise->sigma1_sq == o2.noise->sigma1_sq &&
                       noise->sigma2_sq == o2.noise->sigma2_sq)) &&
           target_epsilon == o2.target_epsilon && policy == o2.policy &&
           schedule == o2.schedule && steps == o2.steps && seed == o2.seed &&
           replicates == o2.replicates && threads == o2.threads &&
           output_dir == o2.output_dir && compare_noise_levels == o2.compare_noise_levels &&
           baselines == o2.baselines && tradeoff == o2.tradeoff;
  }
};

namespace detail {

[[noreturn]] inline void config_fail(const std::string& path, const std::string& msg) {
  throw ParameterError("config: " + path + ": " + msg);
}

inline void check(bool ok, const std::string& path, const std::string& msg) {
  if (!ok) config_fail(path, msg);
}

inline void check_policy(const PolicySpec& p, const std::string& path) {
  switch (p.kind) {
    case PolicySpec::Kind::fixed:
      check(p.alpha >= 0.0 && p.alpha <= 1.0, path + ".alpha", "must lie in [0, 1]");
      break;
    case PolicySpec::Kind::adaptive_oracle:
      check(!p.beta_sq || *p.beta_sq > 0.0, path + ".beta_sq", "must be > 0");
      check(!p.c_sq || *p.c_sq > 0.0, path + ".c_sq", "must be > 0");
      break;
    case PolicySpec::Kind::adaptive_estimated:
      check(p.fallback_alpha >= 0.0 && p.fallback_alpha <= 1.0, path + ".fallback_alpha",
            "must lie in [0, 1]");
      break;
  }
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
  using detail::check;
  check(n_devices >= 1, "dataset.n_devices", "must be >= 1");
  check(d >= 1, "dataset.d", "must be >= 1");
  check(o >= 1, "dataset.o", "must be >= 1");
  check(samples_per_device > d, "dataset.samples_per_device",
        "must exceed dataset.d (full column rank unattainable)");
  check(label_noise_var >= 0.0, "dataset.label_noise_var", "must be >= 0");
  check(straggler_p >= 0.0 && straggler_p < 1.0, "straggler_p", "must lie in [0, 1)");
  check(noise.has_value() != target_epsilon.has_value(), "noise",
        "set exactly one of sigma1_sq/sigma2_sq or epsilon");
  if (noise) {
    check(noise->sigma1_sq >= 0.0 && std::isfinite(noise->sigma1_sq), "noise.sigma1_sq",
          "must be finite and >= 0");
    check(noise->sigma2_sq >= 0.0 && std::isfinite(noise->sigma2_sq), "noise.sigma2_sq",
          "must be finite and >= 0");
  }
  if (target_epsilon) check(*target_epsilon > 0.0, "noise.epsilon", "must be > 0");
  detail::check_policy(policy, "policy");
  if (schedule.kind == ScheduleSpec::Kind::paper_decay) {
    check(schedule.c > 0.0 && std::isfinite(schedule.c), "schedule.c", "must be > 0");
  } else if (schedule.lambda) {
    check(*schedule.lambda > 0.0, "schedule.lambda", "must be > 0");
  }
  check(replicates >= 1, "replicates", "must be >= 1");
  check(!output_dir.empty(), "output_dir", "must not be empty");
  for (std::size_t k = 0; k < compare_noise_levels.size(); ++k) {
    check(compare_noise_levels[k] >= 0.0 && std::isfinite(compare_noise_levels[k]),
          "compare.noise_levels[" + std::to_string(k) + "]", "must be finite and >= 0");
  }
  for (std::size_t k = 0; k < baselines.size(); ++k) {
    const std::string path = "compare.baselines[" + std::to_string(k) + "]";
    check(!baselines[k].name.empty() && baselines[k].name != "ACFL", path + ".name",
          "must be non-empty and not 'ACFL'");
    check(baselines[k].policy.kind != PolicySpec::Kind::adaptive_estimated, path + ".kind",
          "baselines are fixed or adaptive_oracle");
    detail::check_policy(baselines[k].policy, path);
  }
  check(tradeoff.beta_sq > 0.0, "tradeoff.beta_sq", "must be > 0");
  check(tradeoff.c_sq > 0.0, "tradeoff.c_sq", "must be > 0");
  check(tradeoff.lambda > 0.0, "tradeoff.lambda", "must be > 0");
  check(tradeoff.sigma_min > 0.0 && tradeoff.sigma_max >= tradeoff.sigma_min,
        "tradeoff.sigma_grid", "need 0 < min <= max");
  check(tradeoff.sigma_points >= 1, "tradeoff.sigma_grid.points", "must be >= 1");
  for (std::size_t k = 0; k < tradeoff.fixed_alphas.size(); ++k) {
    check(tradeoff.fixed_alphas[k] >= 0.0 && tradeoff.fixed_alphas[k] <= 1.0,
          "tradeoff.fixed_alphas[" + std::to_string(k) + "]", "must lie in [0, 1]");
  }
}

// ---------------------------------------------------------------------------
// JSON mapping
// ---------------------------------------------------------------------------

namespace detail {

using json = nlohmann::json;

template <typename T>
T get_field(const json& obj, const std::string& key, const std::string& path, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    config_fail(path + key, std::string("wrong type (") + e.what() + ")");
  }
}

inline std::size_t get_count(const json& obj, const std::string& key, const std::string& path,
                             std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  check(v.is_number_integer() && v.get<std::int64_t>() >= 0, path + key,
        "must be a non-negative integer");
  return v.get<std::size_t>();
}

inline const json& section(const json& root, const std::string& key, const json& empty) {
  if (!root.contains(key)) return empty;
  check(root.at(key).is_object(), key, "must be an object");
  return root.at(key);
}

inline void reject_unknown(const json& obj, std::initializer_list<const char*> known,
                           const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) config_fail(path + it.key(), "unknown field");
  }
}

inline PolicySpec policy_from_json(const json& j, const std::string& path) {
  check(j.is_object(), path, "must be an object");
  reject_unknown(j, {"kind", "alpha", "beta_sq", "c_sq", "fallback_alpha"}, path + ".");
  PolicySpec p;
  const std::string kind = get_field<std::string>(j, "kind", path + ".", "adaptive_estimated");
  if (kind == "fixed") p.kind = PolicySpec::Kind::fixed;
  else if (kind == "adaptive_oracle") p.kind = PolicySpec::Kind::adaptive_oracle;
  else if (kind == "adaptive_estimated") p.kind = PolicySpec::Kind::adaptive_estimated;
  else config_fail(path + ".kind", "expected fixed | adaptive_oracle | adaptive_estimated");
  p.alpha = get_field<double>(j, "alpha", path + ".", 0.5);
  if (j.contains("beta_sq")) p.beta_sq = get_field<double>(j, "beta_sq", path + ".", 0.0);
  if (j.contains("c_sq")) p.c_sq = get_field<double>(j, "c_sq", path + ".", 0.0);
  p.fallback_alpha = get_field<double>(j, "fallback_alpha", path + ".", 1.0);
  return p;
}

inline json policy_to_json(const PolicySpec& p) {
  json j;
  switch (p.kind) {
    case PolicySpec::Kind::fixed: j["kind"] = "fixed"; break;
    case PolicySpec::Kind::adaptive_oracle: j["kind"] = "adaptive_oracle"; break;
    case PolicySpec::Kind::adaptive_estimated: j["kind"] = "adaptive_estimated"; break;
  }
  j["alpha"] = p.alpha;
  if (p.beta_sq) j["beta_sq"] = *p.beta_sq;
  if (p.c_sq) j["c_sq"] = *p.c_sq;
  j["fallback_alpha"] = p.fallback_alpha;
  return j;
}

}  // namespace detail

/// Parses and validates a config; errors name the offending field path.
inline ExperimentConfig config_from_json(const nlohmann::json& root) {
  using namespace detail;
  check(root.is_object(), "<root>", "must be an object");
  reject_unknown(root,
                 {"dataset", "straggler_p", "noise", "policy", "schedule", "steps", "seed",
                  "replicates", "threads", "output_dir", "compare", "tradeoff"},
                 "");
  const json empty = json::object();
  ExperimentConfig c;

  const json& ds = section(root, "dataset", empty);
  reject_unknown(ds, {"n_devices", "samples_per_device", "d", "o", "label_noise_var"}, "dataset.");
  c.n_devices = get_count(ds, "n_devices", "dataset.", c.n_devices);
  c.samples_per_device = get_count(ds, "samples_per_device", "dataset.", c.samples_per_device);
  c.d = get_count(ds, "d", "dataset.", c.d);
  c.o = get_count(ds, "o", "dataset.", c.o);
  c.label_noise_var = get_field<double>(ds, "label_noise_var", "dataset.", 0.0);

  c.straggler_p = get_field<double>(root, "straggler_p", "", c.straggler_p);

  if (root.contains("noise")) {
    const json& nz = section(root, "noise", empty);
    reject_unknown(nz, {"sigma1_sq", "sigma2_sq", "sigma_sq", "epsilon"}, "noise.");
    if (nz.contains("epsilon")) {
      check(!nz.contains("sigma1_sq") && !nz.contains("sigma2_sq") && !nz.contains("sigma_sq"),
            "noise", "set either variances or epsilon, not both");
      c.noise.reset();
      c.target_epsilon = get_field<double>(nz, "epsilon", "noise.", 0.0);
    } else {
      const double both = get_field<double>(nz, "sigma_sq", "noise.", 0.1);
      c.noise = NoiseParams{get_field<double>(nz, "sigma1_sq", "noise.", both),
                            get_field<double>(nz, "sigma2_sq", "noise.", both)};
    }
  }

  if (root.contains("policy")) c.policy = policy_from_json(root.at("policy"), "policy");

  if (root.contains("schedule")) {
    const json& s = section(root, "schedule", empty);
    reject_unknown(s, {"kind", "c", "lambda"}, "schedule.");
    const std::string kind = get_field<std::string>(s, "kind", "schedule.", "paper_decay");
    if (kind == "paper_decay") c.schedule.kind = ScheduleSpec::Kind::paper_decay;
    else if (kind == "theorem") c.schedule.kind = ScheduleSpec::Kind::theorem;
    else config_fail("schedule.kind", "expected paper_decay | theorem");
    c.schedule.c = get_field<double>(s, "c", "schedule.", c.schedule.c);
    if (s.contains("lambda")) c.schedule.lambda = get_field<double>(s, "lambda", "schedule.", 0.0);
  }

  c.steps = get_count(root, "steps", "", c.steps);
  if (root.contains("seed")) {
    check(root.at("seed").is_number_unsigned(), "seed", "must be a non-negative integer");
    c.seed = root.at("seed").get<std::uint64_t>();
  }
  c.replicates = get_count(root, "replicates", "", c.replicates);
  c.threads = get_count(root, "threads", "", c.threads);
  c.output_dir = get_field<std::string>(root, "output_dir", "", c.output_dir);

  if (root.contains("compare")) {
    const json& cmp = section(root, "compare", empty);
    reject_unknown(cmp, {"noise_levels", "baselines"}, "compare.");
    c.compare_noise_levels =
        get_field<std::vector<double>>(cmp, "noise_levels", "compare.", c.compare_noise_levels);
    if (cmp.contains("baselines")) {
      const json& bl = cmp.at("baselines");
      check(bl.is_array(), "compare.baselines", "must be an array");
      c.baselines.clear();
      for (std::size_t k = 0; k < bl.size(); ++k) {
        const std::string path = "compare.baselines[" + std::to_string(k) + "]";
        BaselineSpec b;
        b.name = get_field<std::string>(bl[k], "name", path + ".", "");
        json pol = bl[k];
        pol.erase("name");
        b.policy = policy_from_json(pol, path);
        c.baselines.push_back(std::move(b));
      }
    }
  }

  if (root.contains("tradeoff")) {
    const json& t = section(root, "tradeoff", empty);
    reject_unknown(t, {"beta_sq", "c_sq", "lambda", "sigma_grid", "fixed_alphas"}, "tradeoff.");
    c.tradeoff.beta_sq = get_field<double>(t, "beta_sq", "tradeoff.", c.tradeoff.beta_sq);
    c.tradeoff.c_sq = get_field<double>(t, "c_sq", "tradeoff.", c.tradeoff.c_sq);
    c.tradeoff.lambda = get_field<double>(t, "lambda", "tradeoff.", c.tradeoff.lambda);
    if (t.contains("sigma_grid")) {
      const json& g = section(t, "sigma_grid", empty);
      reject_unknown(g, {"min", "max", "points"}, "tradeoff.sigma_grid.");
      c.tradeoff.sigma_min = get_field<double>(g, "min", "tradeoff.sigma_grid.", c.tradeoff.sigma_min);
      c.tradeoff.sigma_max = get_field<double>(g, "max", "tradeoff.sigma_grid.", c.tradeoff.sigma_max);
      c.tradeoff.sigma_points =
          get_count(g, "points", "tradeoff.sigma_grid.", c.tradeoff.sigma_points);
    }
    c.tradeoff.fixed_alphas =
        get_field<std::vector<double>>(t, "fixed_alphas", "tradeoff.", c.tradeoff.fixed_alphas);
  }

  c.validate();
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  json j;
  j["dataset"] = {{"n_devices", c.n_devices},
                  {"samples_per_device", c.samples_per_device},
                  {"d", c.d},
                  {"o", c.o},
                  {"label_noise_var", c.label_noise_var}};
  j["straggler_p"] = c.straggler_p;
  if (c.target_epsilon) {
    j["noise"] = {{"epsilon", *c.target_epsilon}};
  } else if (c.noise) {
    j["noise"] = {{"sigma1_sq", c.noise->sigma1_sq}, {"sigma2_sq", c.noise->sigma2_sq}};
  }
  j["policy"] = detail::policy_to_json(c.policy);
  if (c.schedule.kind == ScheduleSpec::Kind::paper_decay) {
    j["schedule"] = {{"kind", "paper_decay"}, {"c", c.schedule.c}};
  } else {
    j["schedule"] = {{"kind", "theorem"}, {"c", c.schedule.c}};
    if (c.schedule.lambda) j["schedule"]["lambda"] = *c.schedule.lambda;
  }
  j["steps"] = c.steps;
  j["seed"] = c.seed;
  j["replicates"] = c.replicates;
  j["threads"] = c.threads;
  j["output_dir"] = c.output_dir;
  json baselines = json::array();
  for (const auto& b : c.baselines) {
    json e = detail::policy_to_json(b.policy);
    e["name"] = b.name;
    baselines.push_back(e);
  }
  j["compare"] = {{"noise_levels", c.compare_noise_levels}, {"baselines", baselines}};
  j["tradeoff"] = {{"beta_sq", c.tradeoff.beta_sq},
                   {"c_sq", c.tradeoff.c_sq},
                   {"lambda", c.tradeoff.lambda},
                   {"sigma_grid",
                    {{"min", c.tradeoff.sigma_min},
                     {"max", c.tradeoff.sigma_max},
                     {"points", c.tradeoff.sigma_points}}},
                   {"fixed_alphas", c.tradeoff.fixed_alphas}};
  return j;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParameterError("config: " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace acfl
