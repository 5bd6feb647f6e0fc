#pragma once

// Memory-modulated routing policy: card-based plan scoring, rule
// application, softmax over the plan space, and the conservative fallback.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "monoscale/bandit.hpp"
#include "monoscale/errors.hpp"
#include "monoscale/world.hpp"

namespace monoscale {

/// Per-feature allowed values; an absent feature matches anything.
struct RuleCondition {
  std::map<std::string, std::set<std::string>> allowed;

  bool is_wildcard() const noexcept { return allowed.empty(); }
  bool operator==(const RuleCondition&) const = default;
};

inline void validate(const RuleCondition& c, const FeatureSpace& space) {
  for (const auto& [name, values] : c.allowed) {
    const auto f = space.find(name);
    if (!f) throw ConfigError("rule condition names unknown feature '" + name + "'");
    if (values.empty()) throw ConfigError("rule condition on '" + name + "' allows no values");
    for (const auto& v : values)
      if (!space.find_value(*f, v))
        throw ConfigError("rule condition: feature '" + name + "' has no value '" + v + "'");
  }
}

/// "*" for the wildcard, else "feature=v1|v2; feature=v3" in name order.
inline std::string describe(const RuleCondition& c) {
  if (c.is_wildcard()) return "*";
  std::string out;
  for (const auto& [name, values] : c.allowed) {
    if (!out.empty()) out += "; ";
    out += name + "=";
    bool first = true;
    for (const auto& v : values) {
      out += (first ? "" : "|") + v;
      first = false;
    }
  }
  return out;
}

inline bool matches(const RuleCondition& c, const FeatureSpace& space, const TaskContext& x) {
  for (const auto& [name, values] : c.allowed)
    if (!values.count(value_of(space, x, name))) return false;
  return true;
}

/// True when some context satisfies both conditions.
inline bool intersects(const RuleCondition& a, const RuleCondition& b) {
  for (const auto& [name, va] : a.allowed) {
    auto it = b.allowed.find(name);
    if (it == b.allowed.end()) continue;
    const bool overlap = std::any_of(va.begin(), va.end(), [&](const auto& v) { return it->second.count(v) > 0; });
    if (!overlap) return false;
  }
  return true;
}

enum class EffectKind { boost, penalize, forbid };

inline std::string_view to_string(EffectKind k) {
  switch (k) {
    case EffectKind::boost: return "boost";
    case EffectKind::penalize: return "penalize";
    case EffectKind::forbid: return "forbid";
  }
  return "?";
}

inline EffectKind effect_kind_from_string(std::string_view s) {
  if (s == "boost") return EffectKind::boost;
  if (s == "penalize") return EffectKind::penalize;
  if (s == "forbid") return EffectKind::forbid;
  throw ConfigError("unknown rule effect '" + std::string(s) + "'");
}

struct RuleEffect {
  EffectKind kind = EffectKind::boost;
  double magnitude = 1.0;  // ignored for forbid

  /// +1 for boost, -1 for penalize and forbid.
  int sign() const noexcept { return kind == EffectKind::boost ? 1 : -1; }
  bool operator==(const RuleEffect&) const = default;
};

struct Provenance {
  int stage = 0;
  int evidence_count = 0;
  double success_rate = 0.0;

  bool operator==(const Provenance&) const = default;
};

struct MemoryEntry {
  std::string id;
  std::string title;
  RuleCondition condition;
  std::string target_agent;
  RuleEffect effect;
  int priority = 0;
  double confidence = 0.0;
  Provenance provenance;

  bool operator==(const MemoryEntry&) const = default;
};

/// Priority carried by the conservative fallback; no distilled rule reaches it.
inline constexpr int kFallbackPriority = std::numeric_limits<int>::max();

/// The wildcard, maximal-priority forbid that fallback_memory appends.
inline bool is_fallback_entry(const MemoryEntry& e) {
  return e.effect.kind == EffectKind::forbid && e.condition.is_wildcard() && e.priority == kFallbackPriority;
}

inline void validate(const MemoryEntry& e) {
  if (e.id.empty()) throw MemoryError("memory entry id must be nonempty");
  if (e.target_agent.empty()) throw MemoryError("memory entry '" + e.id + "' has no target agent");
  if (!(e.confidence >= 0.0 && e.confidence <= 1.0))
    throw MemoryError("memory entry '" + e.id + "': confidence outside [0,1]");
  if (!(e.effect.magnitude >= 0.0)) throw MemoryError("memory entry '" + e.id + "': negative magnitude");
  if (e.provenance.evidence_count < 0)
    throw MemoryError("memory entry '" + e.id + "': negative evidence count");
}

/**
 * The editable policy parameter: an ordered list of routing rules under an
 * entry budget. Fallback forbid entries do not count against the budget,
 * so the safe option can always be constructed.
 */
class Memory {
 public:
  static constexpr std::size_t kDefaultBudget = 64;

  Memory() = default;

  explicit Memory(std::vector<MemoryEntry> entries, std::size_t budget = kDefaultBudget)
      : entries_(std::move(entries)), budget_(budget) {
    std::set<std::string> ids;
    for (const auto& e : entries_) {
      validate(e);
      if (!ids.insert(e.id).second) throw MemoryError("duplicate memory entry id '" + e.id + "'");
    }
    if (budgeted_size() > budget_)
      throw MemoryError("memory holds " + std::to_string(budgeted_size()) + " entries, budget is " +
                        std::to_string(budget_));
  }

  const std::vector<MemoryEntry>& entries() const noexcept { return entries_; }
  std::size_t budget() const noexcept { return budget_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  std::size_t budgeted_size() const {
    return static_cast<std::size_t>(
        std::count_if(entries_.begin(), entries_.end(), [](const auto& e) { return !is_fallback_entry(e); }));
  }

  bool contains(const std::string& id) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.id == id; });
  }

  /// A copy with `e` appended. Throws MemoryError on budget or id clashes.
  Memory with(MemoryEntry e) const {
    auto entries = entries_;
    entries.push_back(std::move(e));
    return Memory(std::move(entries), budget_);
  }

  bool operator==(const Memory&) const = default;

 private:
  std::vector<MemoryEntry> entries_;
  std::size_t budget_ = kDefaultBudget;
};

struct RouterConfig {
  double temperature = 0.5;
  double card_smoothing = 0.01;
  double novelty_bonus = 0.0;

  void validate() const {
    if (!(temperature > 0.0)) throw ConfigError("router temperature must be positive");
    if (!(card_smoothing > 0.0)) throw ConfigError("router card_smoothing must be positive");
    if (!(novelty_bonus >= 0.0)) throw ConfigError("router novelty_bonus must be nonnegative");
  }

  bool operator==(const RouterConfig&) const = default;
};

/// Card-only plan score: sum of ln(card + smoothing) over steps, plus the
/// novelty bonus for each step that invokes an agent added at the pool's
/// current stage. Never reads truth.
inline double base_score(const RouterConfig& config, const FeatureSpace& space, const AgentPool& pool,
                         const TaskContext& x, const Plan& y) {
  const auto& domain = value_of(space, x, kDomainFeature);
  double s = 0.0;
  for (auto step : y.steps) {
    const auto& a = pool[step];
    s += std::log(competence_at(a.card, domain) + config.card_smoothing);
    if (a.stage_added == pool.stage()) s += config.novelty_bonus;
  }
  return s;
}

/// Memory-adjusted score; nullopt stands for FORBIDDEN.
using AdjustedScore = std::optional<double>;

namespace detail {

/// Per-agent effect of a memory at one context: the summed magnitude of
/// the highest-priority matching entries, or forbidden.
struct AgentAdjustment {
  double delta = 0.0;
  bool forbidden = false;
};

inline std::vector<AgentAdjustment> agent_adjustments(const Memory& memory, const FeatureSpace& space,
                                                      const AgentPool& pool, const TaskContext& x) {
  std::vector<AgentAdjustment> adj(pool.size());
  std::vector<std::optional<int>> top(pool.size());
  std::vector<std::pair<std::size_t, const MemoryEntry*>> hits;
  for (const auto& e : memory.entries()) {
    auto a = pool.find(e.target_agent);
    if (!a || !matches(e.condition, space, x)) continue;
    hits.emplace_back(*a, &e);
    if (!top[*a] || e.priority > *top[*a]) top[*a] = e.priority;
  }
  for (const auto& [a, e] : hits) {
    if (e->priority != *top[a]) continue;
    switch (e->effect.kind) {
      case EffectKind::boost: adj[a].delta += e->effect.magnitude; break;
      case EffectKind::penalize: adj[a].delta -= e->effect.magnitude; break;
      case EffectKind::forbid: adj[a].forbidden = true; break;
    }
  }
  return adj;
}

inline AdjustedScore adjust(const std::vector<AgentAdjustment>& adj, const Plan& y, double score) {
  // Each distinct agent in the plan contributes once, in first-appearance order.
  for (std::size_t i = 0; i < y.steps.size(); ++i) {
    const auto a = y.steps[i];
    if (std::find(y.steps.begin(), y.steps.begin() + static_cast<std::ptrdiff_t>(i), a) !=
        y.steps.begin() + static_cast<std::ptrdiff_t>(i))
      continue;
    if (adj[a].forbidden) return std::nullopt;
    score += adj[a].delta;
  }
  return score;
}

}  // namespace detail

/**
 * Applies a memory to one plan's score at x. For each agent in y, only the
 * matching entries of highest priority targeting it apply (equal priorities
 * stack): boost adds, penalize subtracts, forbid makes the plan FORBIDDEN.
 * FORBIDDEN absorbs everything else.
 */
inline AdjustedScore apply_memory(const Memory& memory, const FeatureSpace& space, const AgentPool& pool,
                                  const TaskContext& x, const Plan& y, double score) {
  return detail::adjust(detail::agent_adjustments(memory, space, pool, x), y, score);
}

/// Softmax at temperature tau over non-forbidden plans, in plan order.
/// Forbidden plans get exactly zero.
inline std::vector<double> softmax_over_allowed(const std::vector<AdjustedScore>& scores, double temperature) {
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& s : scores)
    if (s) top = std::max(top, *s);
  std::vector<double> p(scores.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!scores[i]) continue;
    p[i] = std::exp((*scores[i] - top) / temperature);
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

/// pi_m(. | x) over `plans`. Throws EmptySupport if every plan is forbidden.
inline std::vector<double> policy_distribution(const RouterConfig& config, const FeatureSpace& space,
                                               const AgentPool& pool, const Memory& memory, const TaskContext& x,
                                               const std::vector<Plan>& plans) {
  const auto adj = detail::agent_adjustments(memory, space, pool, x);
  std::vector<AdjustedScore> scores;
  scores.reserve(plans.size());
  bool any = false;
  for (const auto& y : plans) {
    scores.push_back(detail::adjust(adj, y, base_score(config, space, pool, x, y)));
    any = any || scores.back().has_value();
  }
  if (!any) throw EmptySupport(describe(space, x));
  return softmax_over_allowed(scores, config.temperature);
}

inline std::vector<double> policy_distribution(const RouterConfig& config, const Bandit& bandit,
                                               const Memory& memory, std::size_t context) {
  return policy_distribution(config, bandit.space(), bandit.pool(), memory, bandit.contexts()[context],
                             bandit.plans());
}

/// Policy at every context of the bandit, [context][plan].
using PolicyTable = std::vector<std::vector<double>>;

inline PolicyTable policy_table(const RouterConfig& config, const Bandit& bandit, const Memory& memory) {
  PolicyTable t;
  t.reserve(bandit.contexts().size());
  for (std::size_t i = 0; i < bandit.contexts().size(); ++i) t.push_back(policy_distribution(config, bandit, memory, i));
  return t;
}

/// False if some context has every plan forbidden.
inline bool has_full_support(const Bandit& bandit, const Memory& memory) {
  for (const auto& x : bandit.contexts()) {
    const auto adj = detail::agent_adjustments(memory, bandit.space(), bandit.pool(), x);
    bool any = false;
    for (const auto& y : bandit.plans())
      if (detail::adjust(adj, y, 0.0)) {
        any = true;
        break;
      }
    if (!any) return false;
  }
  return true;
}

inline std::string fallback_entry_id(const std::string& agent) { return "fallback:" + agent; }

/**
 * m-up: the memory plus a wildcard forbid on `new_agent` at maximal
 * priority. Its policy puts zero mass on plans invoking the new agent and,
 * on the remaining plans, reproduces the pre-expansion policy exactly.
 * Idempotent; the entry is exempt from the budget.
 */
inline Memory fallback_memory(const Memory& memory, const std::string& new_agent, int stage = 0) {
  const auto id = fallback_entry_id(new_agent);
  if (memory.contains(id)) return memory;
  MemoryEntry e;
  e.id = id;
  e.title = "do not call agent " + new_agent;
  e.target_agent = new_agent;
  e.effect = RuleEffect{EffectKind::forbid, 1.0};
  e.priority = kFallbackPriority;
  e.confidence = 1.0;
  e.provenance = Provenance{stage, 0, 0.0};
  return memory.with(std::move(e));
}

inline std::string guard_entry_id(const std::string& agent) { return "guard:" + agent; }

/**
 * A wildcard forbid on `agent` one priority level below `stage`. Rules
 * distilled at `stage` outrank it, so the agent becomes callable only where
 * such a rule applies.
 */
inline MemoryEntry guard_entry(const std::string& agent, int stage) {
  MemoryEntry e;
  e.id = guard_entry_id(agent);
  e.title = "call agent " + agent + " only where a newer rule applies";
  e.target_agent = agent;
  e.effect = RuleEffect{EffectKind::forbid, 1.0};
  e.priority = stage - 1;
  e.confidence = 1.0;
  e.provenance = Provenance{stage, 0, 0.0};
  return e;
}

}  // namespace monoscale
