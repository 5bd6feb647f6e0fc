#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "monoscale/monoscale.hpp"

namespace testing_helpers {

using namespace monoscale;

inline AgentProfile make_agent(std::string id, Competence card, Competence truth, int stage = 0) {
  return AgentProfile{std::move(id), std::move(card), std::move(truth), std::nullopt, stage};
}

/// One feature, domain in {code, web}.
inline FeatureSpace two_domain_space() { return FeatureSpace({{"domain", {"code", "web"}}}); }

/// A(0.9 code, 0.2 web), B(0.3, 0.8), equal cards so the router is uniform.
inline Bandit two_context_bandit() {
  return Bandit(two_domain_space(),
                AgentPool({make_agent("A", {{"code", 0.5}, {"web", 0.5}}, {{"code", 0.9}, {"web", 0.2}}),
                           make_agent("B", {{"code", 0.5}, {"web", 0.5}}, {{"code", 0.3}, {"web", 0.8}})}),
                RewardModel{}, 1);
}

inline MemoryEntry entry(std::string id, std::string agent, EffectKind kind, double magnitude = 1.0,
                         int priority = 0, RuleCondition cond = {}) {
  MemoryEntry e;
  e.id = std::move(id);
  e.title = e.id;
  e.condition = std::move(cond);
  e.target_agent = std::move(agent);
  e.effect = RuleEffect{kind, magnitude};
  e.priority = priority;
  e.confidence = 0.5;
  return e;
}

inline Bandit standard_bandit(const std::string& preset = "clean_10", std::size_t n_agents = 3, int l_max = 1) {
  auto agents = presets::roster(preset, FeatureSpace::standard());
  agents.resize(n_agents);
  return Bandit(FeatureSpace::standard(), AgentPool(agents), RewardModel{}, l_max);
}

/// J by a straight double loop over the policy table, long double accumulator.
inline double oracle_J(const RouterConfig& cfg, const Bandit& b, const Memory& m, const ContextDistribution& d) {
  long double j = 0;
  for (std::size_t x = 0; x < b.contexts().size(); ++x) {
    if (d[x] == 0.0) continue;
    const auto pi = policy_distribution(cfg, b, m, x);
    long double v = 0;
    for (std::size_t y = 0; y < pi.size(); ++y)
      v += static_cast<long double>(pi[y]) * success_prob(b.space(), b.pool(), b.contexts()[x], b.plans()[y], b.model());
    j += static_cast<long double>(d[x]) * v;
  }
  return static_cast<double>(j);
}

}  // namespace testing_helpers
