#pragma once

// Ten-agent rosters. The clean roster mirrors a web / document / coding
// starter cohort followed by progressively more specialized workers; the
// malfunctioning roster swaps agents 4, 5, 7 and 10 for broken variants.

#include <string>
#include <string_view>
#include <vector>

#include "monoscale/errors.hpp"
#include "monoscale/world.hpp"

namespace monoscale::presets {

namespace detail {

// Domain order: web, code, math, doc, media, reasoning.
inline Competence comp(double web, double code, double math, double doc, double media, double reasoning) {
  return {{"web", web}, {"code", code}, {"math", math}, {"doc", doc}, {"media", media}, {"reasoning", reasoning}};
}

inline AgentProfile agent(std::string id, Competence card, Competence truth) {
  return AgentProfile{std::move(id), std::move(card), std::move(truth), std::nullopt, 0};
}

inline AgentProfile honest(std::string id, const Competence& c) { return agent(std::move(id), c, c); }

}  // namespace detail

inline constexpr std::size_t kInitialPoolSize = 3;

/// Insertion order 1..10. Cards equal truth for the first three agents;
/// later agents carry a modest card/truth gap in either direction.
inline std::vector<AgentProfile> clean_10() {
  using detail::agent;
  using detail::comp;
  using detail::honest;
  return {
      honest("web_agent", comp(0.80, 0.20, 0.20, 0.45, 0.30, 0.35)),
      honest("document_processing_agent", comp(0.30, 0.40, 0.25, 0.75, 0.55, 0.30)),
      honest("reasoning_coding_agent", comp(0.25, 0.75, 0.60, 0.40, 0.10, 0.60)),
      agent("search_expert_agent", comp(0.90, 0.15, 0.20, 0.50, 0.30, 0.35), comp(0.88, 0.15, 0.20, 0.45, 0.25, 0.30)),
      agent("code_agent", comp(0.15, 0.85, 0.45, 0.30, 0.15, 0.40), comp(0.15, 0.88, 0.45, 0.25, 0.10, 0.40)),
      agent("math_agent", comp(0.20, 0.50, 0.90, 0.25, 0.10, 0.60), comp(0.20, 0.50, 0.92, 0.25, 0.10, 0.65)),
      agent("document_agent", comp(0.35, 0.20, 0.20, 0.90, 0.30, 0.35), comp(0.35, 0.20, 0.20, 0.85, 0.30, 0.30)),
      agent("reasoning_agent", comp(0.35, 0.45, 0.65, 0.35, 0.15, 0.90), comp(0.35, 0.45, 0.60, 0.35, 0.15, 0.92)),
      agent("image_agent", comp(0.20, 0.15, 0.20, 0.45, 0.75, 0.30), comp(0.20, 0.15, 0.20, 0.40, 0.80, 0.30)),
      agent("multimedia_agent", comp(0.25, 0.15, 0.15, 0.30, 0.90, 0.25), comp(0.25, 0.15, 0.15, 0.30, 0.85, 0.25)),
  };
}

/// clean_10 with insertion positions 4, 5, 7, 10 replaced by
/// semantic_mismatch, honey_pot, partial_core_failure and false_advertising
/// variants.
inline std::vector<AgentProfile> malfunctioning_10(const std::vector<std::string>& domains) {
  auto agents = clean_10();
  agents[3] = with_malfunction(agents[3], Archetype::semantic_mismatch, {"search"}, domains);
  agents[4] = with_malfunction(agents[4], Archetype::honey_pot, {"execute"}, domains);
  agents[6] = with_malfunction(agents[6], Archetype::partial_core_failure, {"extract"}, domains);
  agents[9] = with_malfunction(agents[9], Archetype::false_advertising, {"extract", "search"}, domains);
  return agents;
}

inline std::vector<AgentProfile> roster(std::string_view name, const FeatureSpace& space) {
  if (name == "clean_10") return clean_10();
  if (name == "malfunctioning_10") return malfunctioning_10(space.domains());
  throw ConfigError("unknown pool preset '" + std::string(name) + "'");
}

inline std::vector<std::string> names() { return {"clean_10", "malfunctioning_10"}; }

}  // namespace monoscale::presets
