#pragma once

// Versioned JSON run configuration. Every field has a default; serializing
// a parsed config writes all of them, so a snapshot describes its run fully.

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "monoscale/errors.hpp"
#include "monoscale/io.hpp"
#include "monoscale/stages.hpp"

namespace monoscale {

inline constexpr int kConfigSchemaVersion = 1;

struct RunConfig {
  std::string run_id;  // empty means "<preset>-<mode>-s<seed>"
  Scenario scenario;

  std::string effective_run_id() const {
    if (!run_id.empty()) return run_id;
    return scenario.preset + "-" + std::string(to_string(scenario.mode)) + "-s" + std::to_string(scenario.seed);
  }
};

namespace detail {

// Reads fields of one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type");
    }
  }

  void get_string(const char* key, std::string& out) { get(key, out); }

  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key '" + where_ + "." + k + "'");
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline Json to_json(const RunConfig& c) {
  const auto& s = c.scenario;
  Json deployment;
  if (s.deployment == ContextDistribution::uniform(s.space)) {
    deployment = "uniform";
  } else {
    deployment = Json::array();
    for (double w : s.deployment.weights()) deployment.push_back(w);
  }
  return {
      {"version", kConfigSchemaVersion},
      {"run_id", c.effective_run_id()},
      {"preset", s.preset},
      {"seed", s.seed},
      {"mode", std::string(to_string(s.mode))},
      {"l_max", s.l_max},
      {"memory_budget", s.memory_budget},
      {"evidence_samples", s.evidence_samples},
      {"update_distribution", std::string(to_string(s.update_distribution))},
      {"deployment", std::move(deployment)},
      {"reward", {{"difficulty_decay", s.reward.difficulty_decay}, {"mode", std::string(to_string(s.reward.mode))}}},
      {"router",
       {{"temperature", s.router.temperature},
        {"card_smoothing", s.router.card_smoothing},
        {"novelty_bonus", s.router.novelty_bonus}}},
      {"synth",
       {{"n_tasks", s.synth.n_tasks},
        {"n_rollouts", s.synth.n_rollouts},
        {"boundary_fraction", s.synth.boundary_fraction},
        {"offpool_fraction", s.synth.offpool_fraction},
        {"solvable_threshold", s.synth.solvable_threshold},
        {"warm_mix", s.synth.warm_mix}}},
      {"distill",
       {{"n_min", s.distill.n_min},
        {"theta_pos", s.distill.theta_pos},
        {"theta_neg", s.distill.theta_neg},
        {"forbid_cut", s.distill.forbid_cut},
        {"boost_magnitude", s.distill.boost_magnitude},
        {"penalize_magnitude", s.distill.penalize_magnitude}}},
      {"trust",
       {{"delta", s.trust.delta},
        {"candidate_cap", s.trust.candidate_cap},
        {"evaluation", std::string(to_string(s.trust.evaluation))},
        {"empirical_samples", s.trust.empirical_samples},
        {"scoped_onboarding", s.trust.scoped_onboarding}}},
  };
}

/// Parses and validates a config. Missing fields take their defaults;
/// unknown fields and a wrong version are errors.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  detail::ObjectReader top(j, "config");
  int version = -1;
  top.get("version", version);
  if (version != kConfigSchemaVersion) throw SchemaVersionError(kConfigSchemaVersion, version);

  RunConfig c;
  std::string preset = "clean_10";
  std::uint64_t seed = 0;
  std::string mode = "monoscale";
  top.get("run_id", c.run_id);
  top.get("preset", preset);
  top.get("seed", seed);
  top.get("mode", mode);
  c.scenario = preset_scenario(preset, seed, mode_from_string(mode));
  auto& s = c.scenario;

  top.get("l_max", s.l_max);
  top.get("memory_budget", s.memory_budget);
  top.get("evidence_samples", s.evidence_samples);
  std::string update = "deployment";
  top.get("update_distribution", update);
  s.update_distribution = update_distribution_from_string(update);

  if (const auto* d = top.child("deployment")) {
    if (d->is_string()) {
      if (d->get<std::string>() != "uniform") throw ConfigError("config.deployment must be \"uniform\" or weights");
    } else if (d->is_array()) {
      std::vector<double> w;
      for (const auto& v : *d) {
        if (!v.is_number()) throw ConfigError("config.deployment weights must be numbers");
        w.push_back(v.get<double>());
      }
      s.deployment = ContextDistribution(std::move(w));
    } else {
      throw ConfigError("config.deployment must be \"uniform\" or weights");
    }
  }

  if (const auto* r = top.child("reward")) {
    detail::ObjectReader rd(*r, "config.reward");
    rd.get("difficulty_decay", s.reward.difficulty_decay);
    std::string m = std::string(to_string(s.reward.mode));
    rd.get("mode", m);
    s.reward.mode = reward_mode_from_string(m);
    rd.finish();
  }
  if (const auto* r = top.child("router")) {
    detail::ObjectReader rd(*r, "config.router");
    rd.get("temperature", s.router.temperature);
    rd.get("card_smoothing", s.router.card_smoothing);
    rd.get("novelty_bonus", s.router.novelty_bonus);
    rd.finish();
  }
  if (const auto* r = top.child("synth")) {
    detail::ObjectReader rd(*r, "config.synth");
    rd.get("n_tasks", s.synth.n_tasks);
    rd.get("n_rollouts", s.synth.n_rollouts);
    rd.get("boundary_fraction", s.synth.boundary_fraction);
    rd.get("offpool_fraction", s.synth.offpool_fraction);
    rd.get("solvable_threshold", s.synth.solvable_threshold);
    rd.get("warm_mix", s.synth.warm_mix);
    rd.finish();
  }
  if (const auto* r = top.child("distill")) {
    detail::ObjectReader rd(*r, "config.distill");
    rd.get("n_min", s.distill.n_min);
    rd.get("theta_pos", s.distill.theta_pos);
    rd.get("theta_neg", s.distill.theta_neg);
    rd.get("forbid_cut", s.distill.forbid_cut);
    rd.get("boost_magnitude", s.distill.boost_magnitude);
    rd.get("penalize_magnitude", s.distill.penalize_magnitude);
    rd.finish();
  }
  if (const auto* r = top.child("trust")) {
    detail::ObjectReader rd(*r, "config.trust");
    rd.get("delta", s.trust.delta);
    rd.get("candidate_cap", s.trust.candidate_cap);
    std::string e = std::string(to_string(s.trust.evaluation));
    rd.get("evaluation", e);
    s.trust.evaluation = evaluation_from_string(e);
    rd.get("empirical_samples", s.trust.empirical_samples);
    rd.get("scoped_onboarding", s.trust.scoped_onboarding);
    rd.finish();
  }
  top.finish();
  s.validate();
  return c;
}

/// Canonical text form: two-space indented JSON with a trailing newline.
inline std::string dump_config(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

inline RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace monoscale
