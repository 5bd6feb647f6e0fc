#pragma once

// Random small bandit instances: a feature space of at most 90 contexts,
// 2 to 6 agents, plans of length at most 2, random memories and a random
// context distribution with some zero weights.

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "monoscale/bandit.hpp"
#include "monoscale/eval.hpp"
#include "monoscale/rng.hpp"
#include "monoscale/router.hpp"
#include "monoscale/world.hpp"

namespace monoscale {

struct RandomInstance {
  std::uint64_t seed = 0;
  RouterConfig router;
  Bandit bandit;
  ContextDistribution dist;
  Memory base;
  Memory candidate;
  AgentProfile extra;  // fresh agent for expansion checks
};

namespace detail {

inline double uniform_in(Stream& s, double lo, double hi) { return lo + (hi - lo) * s.uniform(); }

inline std::size_t int_in(Stream& s, std::size_t lo, std::size_t hi) { return lo + s.index(hi - lo + 1); }

inline FeatureSpace random_space(Stream& s) {
  const std::vector<std::string> domains = {"web", "code", "math", "doc", "media", "reasoning"};
  const std::vector<std::string> tools = {"search", "execute", "extract", "transcribe", "none"};
  for (;;) {
    const auto nd = int_in(s, 2, 6);
    const auto nt = int_in(s, 2, 5);
    const auto nl = int_in(s, 2, 3);
    if (nd * nt * nl > 90) continue;
    std::vector<std::string> levels;
    for (std::size_t i = 1; i <= nl; ++i) levels.push_back(std::to_string(i));
    return FeatureSpace({{"domain", {domains.begin(), domains.begin() + static_cast<std::ptrdiff_t>(nd)}},
                         {"difficulty", levels},
                         {"tool_class", {tools.begin(), tools.begin() + static_cast<std::ptrdiff_t>(nt)}}});
  }
}

inline AgentProfile random_agent(Stream& s, const FeatureSpace& space, const std::string& id) {
  AgentProfile a;
  a.id = id;
  for (const auto& d : space.domains()) {
    a.card[d] = uniform_in(s, 0.05, 1.0);
    a.truth[d] = uniform_in(s, 0.0, 1.0);
  }
  return a;
}

inline RuleCondition random_condition(Stream& s, const FeatureSpace& space) {
  RuleCondition c;
  for (const auto& f : space.features()) {
    if (s.uniform() < 0.5) continue;
    std::set<std::string> vals;
    for (const auto& v : f.values)
      if (s.uniform() < 0.5) vals.insert(v);
    if (vals.empty()) vals.insert(f.values[s.index(f.values.size())]);
    c.allowed[f.name] = std::move(vals);
  }
  return c;
}

inline Memory random_memory(Stream& s, const Bandit& bandit, const std::string& prefix) {
  for (;;) {
    std::vector<MemoryEntry> entries;
    const auto n = int_in(s, 0, 6);
    for (std::size_t i = 0; i < n; ++i) {
      MemoryEntry e;
      e.id = prefix + std::to_string(i);
      e.title = e.id;
      e.condition = random_condition(s, bandit.space());
      e.target_agent = bandit.pool()[s.index(bandit.pool().size())].id;
      const double u = s.uniform();
      e.effect.kind = u < 0.45 ? EffectKind::boost : u < 0.9 ? EffectKind::penalize : EffectKind::forbid;
      e.effect.magnitude = uniform_in(s, 0.1, 2.0);
      e.priority = static_cast<int>(s.index(3));
      e.confidence = s.uniform();
      entries.push_back(std::move(e));
    }
    Memory m(std::move(entries));
    if (has_full_support(bandit, m)) return m;
  }
}

inline ContextDistribution random_distribution(Stream& s, std::size_t n) {
  std::vector<double> w(n);
  for (auto& v : w) v = s.uniform() < 0.2 ? 0.0 : -std::log(1.0 - s.uniform());
  w[s.index(n)] += 1.0;
  return ContextDistribution::normalized(std::move(w));
}

}  // namespace detail

/// Deterministic in `seed`. The router has no novelty bonus.
inline RandomInstance random_instance(std::uint64_t seed) {
  Stream s = Stream::derive(seed, 0, "instance");
  auto space = detail::random_space(s);
  const auto n_agents = detail::int_in(s, 2, 5);
  std::vector<AgentProfile> agents;
  for (std::size_t i = 0; i < n_agents; ++i) agents.push_back(detail::random_agent(s, space, "a" + std::to_string(i)));
  const int l_max = static_cast<int>(detail::int_in(s, 1, 2));
  RouterConfig router;
  router.temperature = detail::uniform_in(s, 0.2, 2.0);
  Bandit bandit(space, AgentPool(std::move(agents)), RewardModel{detail::uniform_in(s, 0.5, 1.0)}, l_max);
  auto dist = detail::random_distribution(s, bandit.contexts().size());
  auto base = detail::random_memory(s, bandit, "b");
  auto candidate = detail::random_memory(s, bandit, "c");
  auto extra = detail::random_agent(s, space, "a" + std::to_string(n_agents));
  return RandomInstance{seed, router, std::move(bandit), std::move(dist), std::move(base), std::move(candidate),
                        std::move(extra)};
}

}  // namespace monoscale
