#pragma once

// JSON projections of contexts, plans and warm-up tasks.

#include <string>

#include <json.hpp>

#include "monoscale/eval.hpp"
#include "monoscale/synth.hpp"
#include "monoscale/world.hpp"

namespace monoscale {

using Json = nlohmann::ordered_json;

inline Json to_json(const FeatureSpace& space, const TaskContext& x) {
  Json j = Json::object();
  const auto& fs = space.features();
  for (std::size_t f = 0; f < fs.size(); ++f) j[fs[f].name] = fs[f].values.at(x.values.at(f));
  return j;
}

inline TaskContext context_from_json(const FeatureSpace& space, const nlohmann::json& j) {
  std::map<std::string, std::string> assignment;
  for (const auto& [k, v] : j.items()) assignment[k] = v.get<std::string>();
  return make_context(space, assignment);
}

inline Json to_json(const AgentPool& pool, const Plan& y) {
  Json j = Json::array();
  for (const auto& id : plan_ids(pool, y)) j.push_back(id);
  return j;
}

/// A finite divergence as a number, INFINITE as the string "INF".
inline Json to_json(const Divergence& d) {
  if (d.is_infinite()) return "INF";
  return d.nats();
}

/// One line of tasks/stage_<k>.jsonl.
inline Json to_json(const FeatureSpace& space, const AgentPool& pool, const WarmTask& t) {
  Json rollouts = Json::array();
  for (const auto& r : t.rollouts) rollouts.push_back({{"plan", to_json(pool, r.plan)}, {"reward", r.reward}});
  return {
      {"context", to_json(space, t.context)},
      {"rollouts", std::move(rollouts)},
      {"oracle_best", {{"plan", to_json(pool, t.oracle_best)}, {"probability", t.oracle_best_probability}}},
      {"kept", t.kept},
      {"reject_reason", t.reject_reason ? Json(std::string(to_string(*t.reject_reason))) : Json(nullptr)},
  };
}

}  // namespace monoscale
