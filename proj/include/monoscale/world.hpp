#pragma once

// Finite context space, agent profiles, pools, plan spaces and the
// ground-truth reward model.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdio>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "monoscale/errors.hpp"
#include "monoscale/rng.hpp"

namespace monoscale {

inline constexpr std::string_view kDomainFeature = "domain";
inline constexpr std::string_view kDifficultyFeature = "difficulty";
inline constexpr std::string_view kToolClassFeature = "tool_class";

struct Feature {
  std::string name;
  std::vector<std::string> values;

  bool operator==(const Feature&) const = default;
};

/// An ordered product of categorical features. Contexts are enumerated in
/// lexicographic order with the first feature most significant.
class FeatureSpace {
 public:
  static constexpr std::size_t kDefaultCap = 4096;

  explicit FeatureSpace(std::vector<Feature> features, std::size_t cap = kDefaultCap)
      : features_(std::move(features)), cap_(cap) {
    if (features_.empty()) throw ConfigError("feature space needs at least one feature");
    std::set<std::string> names;
    long double product = 1;
    for (const auto& f : features_) {
      if (!names.insert(f.name).second) throw ConfigError("duplicate feature name '" + f.name + "'");
      if (f.values.size() < 2)
        throw ConfigError("feature '" + f.name + "' needs at least 2 values, has " +
                          std::to_string(f.values.size()));
      std::set<std::string> seen(f.values.begin(), f.values.end());
      if (seen.size() != f.values.size())
        throw ConfigError("feature '" + f.name + "' has duplicate values");
      product *= static_cast<long double>(f.values.size());
    }
    if (product > static_cast<long double>(cap_)) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.0Lf", product);
      throw ConfigError(std::string("context space too large: product size ") + buf + " exceeds cap " +
                        std::to_string(cap_));
    }
    count_ = static_cast<std::size_t>(product);
  }

  /// domain x difficulty x tool_class, 6 * 3 * 5 = 90 contexts.
  static FeatureSpace standard() {
    return FeatureSpace({
        {std::string(kDomainFeature), {"web", "code", "math", "doc", "media", "reasoning"}},
        {std::string(kDifficultyFeature), {"1", "2", "3"}},
        {std::string(kToolClassFeature), {"search", "execute", "extract", "transcribe", "none"}},
    });
  }

  const std::vector<Feature>& features() const noexcept { return features_; }
  std::size_t cap() const noexcept { return cap_; }
  std::size_t context_count() const noexcept { return count_; }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < features_.size(); ++i)
      if (features_[i].name == name) return i;
    return std::nullopt;
  }

  std::size_t index_of(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw LookupError("unknown feature '" + std::string(name) + "'");
  }

  std::optional<std::size_t> find_value(std::size_t feature, std::string_view value) const {
    const auto& vs = features_.at(feature).values;
    for (std::size_t i = 0; i < vs.size(); ++i)
      if (vs[i] == value) return i;
    return std::nullopt;
  }

  std::size_t value_index(std::size_t feature, std::string_view value) const {
    if (auto i = find_value(feature, value)) return *i;
    throw LookupError("feature '" + features_.at(feature).name + "' has no value '" +
                      std::string(value) + "'");
  }

  /// Values of the domain feature, or empty if the space has none.
  std::vector<std::string> domains() const {
    auto i = find(kDomainFeature);
    return i ? features_[*i].values : std::vector<std::string>{};
  }

  bool operator==(const FeatureSpace& o) const { return features_ == o.features_ && cap_ == o.cap_; }

 private:
  std::vector<Feature> features_;
  std::size_t cap_;
  std::size_t count_ = 0;
};

/// One value index per feature of the owning space.
struct TaskContext {
  std::vector<std::uint32_t> values;

  auto operator<=>(const TaskContext&) const = default;
  bool operator==(const TaskContext&) const = default;
};

inline std::vector<TaskContext> enumerate_contexts(const FeatureSpace& space) {
  if (space.context_count() > space.cap())
    throw ConfigError("context space product size " + std::to_string(space.context_count()) +
                      " exceeds cap " + std::to_string(space.cap()));
  const auto& fs = space.features();
  std::vector<TaskContext> out;
  out.reserve(space.context_count());
  TaskContext cur{std::vector<std::uint32_t>(fs.size(), 0)};
  for (std::size_t n = 0; n < space.context_count(); ++n) {
    out.push_back(cur);
    for (std::size_t f = fs.size(); f-- > 0;) {
      if (++cur.values[f] < fs[f].values.size()) break;
      cur.values[f] = 0;
    }
  }
  return out;
}

/// Position of a context in enumerate_contexts order.
inline std::size_t context_index(const FeatureSpace& space, const TaskContext& x) {
  const auto& fs = space.features();
  if (x.values.size() != fs.size()) throw LookupError("context arity does not match feature space");
  std::size_t idx = 0;
  for (std::size_t f = 0; f < fs.size(); ++f) {
    if (x.values[f] >= fs[f].values.size()) throw LookupError("context value out of range");
    idx = idx * fs[f].values.size() + x.values[f];
  }
  return idx;
}

inline TaskContext make_context(const FeatureSpace& space,
                                const std::map<std::string, std::string>& assignment) {
  const auto& fs = space.features();
  if (assignment.size() != fs.size())
    throw LookupError("context must assign every feature exactly once");
  TaskContext x{std::vector<std::uint32_t>(fs.size(), 0)};
  for (const auto& [name, value] : assignment) {
    const auto f = space.index_of(name);
    x.values[f] = static_cast<std::uint32_t>(space.value_index(f, value));
  }
  return x;
}

inline const std::string& value_of(const FeatureSpace& space, const TaskContext& x, std::string_view feature) {
  const auto f = space.index_of(feature);
  return space.features()[f].values.at(x.values.at(f));
}

/// "domain=code,difficulty=1,tool_class=search"
inline std::string describe(const FeatureSpace& space, const TaskContext& x) {
  std::string s;
  const auto& fs = space.features();
  for (std::size_t f = 0; f < fs.size(); ++f) {
    if (f) s += ',';
    s += fs[f].name + '=' + fs[f].values.at(x.values.at(f));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Agents

enum class Archetype { semantic_mismatch, honey_pot, partial_core_failure, false_advertising };

inline std::string_view to_string(Archetype a) {
  switch (a) {
    case Archetype::semantic_mismatch: return "semantic_mismatch";
    case Archetype::honey_pot: return "honey_pot";
    case Archetype::partial_core_failure: return "partial_core_failure";
    case Archetype::false_advertising: return "false_advertising";
  }
  return "?";
}

inline Archetype archetype_from_string(std::string_view s) {
  for (auto a : {Archetype::semantic_mismatch, Archetype::honey_pot, Archetype::partial_core_failure,
                 Archetype::false_advertising})
    if (to_string(a) == s) return a;
  throw ConfigError("unknown malfunction archetype '" + std::string(s) + "'");
}

inline constexpr double kHoneyPotCard = 0.95;
inline constexpr double kDefaultMalfunctionFloor = 0.02;

struct MalfunctionSpec {
  Archetype archetype = Archetype::semantic_mismatch;
  std::set<std::string> broken_tool_classes;
  double floor = kDefaultMalfunctionFloor;

  bool operator==(const MalfunctionSpec&) const = default;
};

using Competence = std::map<std::string, double>;

inline double competence_at(const Competence& c, const std::string& domain) {
  auto it = c.find(domain);
  return it == c.end() ? 0.0 : it->second;
}

/// What the router sees (card) next to what execution obeys (truth).
struct AgentProfile {
  std::string id;
  Competence card;
  Competence truth;
  std::optional<MalfunctionSpec> malfunction;
  int stage_added = 0;

  bool operator==(const AgentProfile&) const = default;
};

inline void validate(const AgentProfile& a) {
  if (a.id.empty()) throw ConfigError("agent id must be nonempty");
  if (a.stage_added < 0) throw ConfigError("agent '" + a.id + "': stage_added must be nonnegative");
  auto check = [&](const Competence& c, const char* what) {
    for (const auto& [d, v] : c)
      if (!(v >= 0.0 && v <= 1.0))
        throw ConfigError("agent '" + a.id + "': " + what + "[" + d + "] = " + std::to_string(v) +
                          " outside [0,1]");
  };
  check(a.card, "card");
  check(a.truth, "truth");
  if (a.malfunction) {
    const auto& m = *a.malfunction;
    if (m.broken_tool_classes.empty())
      throw ConfigError("agent '" + a.id + "': malfunction needs at least one broken tool class");
    if (!(m.floor >= 0.0 && m.floor <= 1.0))
      throw ConfigError("agent '" + a.id + "': malfunction floor outside [0,1]");
    for (const auto& [d, v] : a.card)
      if (m.floor > v)
        throw ConfigError("agent '" + a.id + "': malfunction floor exceeds card[" + d + "]");
  }
}

/// Attaches a malfunction archetype to a profile. honey_pot inflates every
/// card entry over `domains`; the other archetypes leave the card as is.
/// In all cases execution on a broken tool class succeeds with the floor
/// probability only.
inline AgentProfile with_malfunction(AgentProfile a, Archetype archetype,
                                     std::set<std::string> broken_tool_classes,
                                     const std::vector<std::string>& domains,
                                     double floor = kDefaultMalfunctionFloor) {
  if (archetype == Archetype::honey_pot)
    for (const auto& d : domains) a.card[d] = kHoneyPotCard;
  a.malfunction = MalfunctionSpec{archetype, std::move(broken_tool_classes), floor};
  validate(a);
  return a;
}

// ---------------------------------------------------------------------------
// Pools

/// Agents ordered by stage_added, then insertion. Expansion only appends,
/// so an agent's index never changes once it has joined.
class AgentPool {
 public:
  AgentPool() = default;

  explicit AgentPool(std::vector<AgentProfile> agents) : agents_(std::move(agents)) {
    std::set<std::string> ids;
    int prev = 0;
    for (const auto& a : agents_) {
      validate(a);
      if (!ids.insert(a.id).second) throw ConfigError("duplicate agent id '" + a.id + "'");
      if (a.stage_added < prev) throw ConfigError("agents must be ordered by stage_added");
      prev = a.stage_added;
      stage_ = std::max(stage_, a.stage_added);
    }
  }

  const std::vector<AgentProfile>& agents() const noexcept { return agents_; }
  std::size_t size() const noexcept { return agents_.size(); }
  bool empty() const noexcept { return agents_.empty(); }
  int stage() const noexcept { return stage_; }
  const AgentProfile& operator[](std::size_t i) const { return agents_.at(i); }

  std::optional<std::size_t> find(std::string_view id) const {
    for (std::size_t i = 0; i < agents_.size(); ++i)
      if (agents_[i].id == id) return i;
    return std::nullopt;
  }

  std::size_t index_of(std::string_view id) const {
    if (auto i = find(id)) return *i;
    throw LookupError("unknown agent id '" + std::string(id) + "'");
  }

  bool operator==(const AgentPool&) const = default;

 private:
  std::vector<AgentProfile> agents_;
  int stage_ = 0;
};

/// Returns the pool at stage k+1 with `agent` appended. Existing profiles are
/// copied unchanged.
inline AgentPool expand_pool(const AgentPool& pool, AgentProfile agent) {
  if (pool.find(agent.id))
    throw ExpansionError("agent id '" + agent.id + "' is already in the pool");
  agent.stage_added = pool.stage() + 1;
  auto agents = pool.agents();
  agents.push_back(std::move(agent));
  return AgentPool(std::move(agents));
}

// ---------------------------------------------------------------------------
// Plans

/// A sequence of agent invocations, by pool index.
struct Plan {
  std::vector<std::size_t> steps;

  auto operator<=>(const Plan&) const = default;
  bool operator==(const Plan&) const = default;
};

inline constexpr int kMaxPlanLength = 3;

inline std::vector<std::string> plan_ids(const AgentPool& pool, const Plan& y) {
  std::vector<std::string> ids;
  for (auto s : y.steps) {
    if (s >= pool.size()) throw LookupError("plan step " + std::to_string(s) + " not in pool");
    ids.push_back(pool[s].id);
  }
  return ids;
}

inline Plan plan_from_ids(const AgentPool& pool, const std::vector<std::string>& ids) {
  Plan y;
  for (const auto& id : ids) y.steps.push_back(pool.index_of(id));
  return y;
}

inline std::string describe(const AgentPool& pool, const Plan& y) {
  std::string s = "[";
  for (std::size_t i = 0; i < y.steps.size(); ++i) {
    if (i) s += ',';
    s += pool[y.steps[i]].id;
  }
  return s + "]";
}

/**
 * Every sequence of 1..l_max pool agents.
 *
 * Plans are grouped by the newest agent they invoke (largest pool index),
 * then ordered by length, then lexicographically. The plans over the first
 * n-1 agents are therefore an exact prefix of the plans over n agents, so
 * Y_{k-1} embeds in Y_k by position.
 */
inline std::vector<Plan> plan_space(const AgentPool& pool, int l_max) {
  if (l_max < 1 || l_max > kMaxPlanLength)
    throw ConfigError("l_max must lie in [1, " + std::to_string(kMaxPlanLength) + "], got " +
                      std::to_string(l_max));
  if (pool.empty()) throw ConfigError("plan space of an empty pool");
  std::vector<Plan> out;
  const std::size_t n = pool.size();
  for (std::size_t newest = 0; newest < n; ++newest) {
    for (int len = 1; len <= l_max; ++len) {
      // All sequences over agents [0, newest] of this length that use `newest`.
      std::vector<std::size_t> cur(static_cast<std::size_t>(len), 0);
      bool more = true;
      while (more) {
        if (std::find(cur.begin(), cur.end(), newest) != cur.end()) out.push_back(Plan{cur});
        // Odometer increment over digits in [0, newest].
        more = false;
        for (std::size_t pos = cur.size(); pos-- > 0;) {
          if (++cur[pos] <= newest) {
            more = true;
            break;
          }
          cur[pos] = 0;
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rewards

enum class RewardMode { expected, bernoulli };

inline std::string_view to_string(RewardMode m) { return m == RewardMode::expected ? "expected" : "bernoulli"; }

inline RewardMode reward_mode_from_string(std::string_view s) {
  if (s == "expected") return RewardMode::expected;
  if (s == "bernoulli") return RewardMode::bernoulli;
  throw ConfigError("unknown reward mode '" + std::string(s) + "'");
}

struct RewardModel {
  double difficulty_decay = 0.8;
  RewardMode mode = RewardMode::bernoulli;

  void validate() const {
    if (!(difficulty_decay > 0.0 && difficulty_decay <= 1.0))
      throw ConfigError("difficulty_decay must lie in (0, 1]");
  }

  bool operator==(const RewardModel&) const = default;
};

namespace detail {

inline int difficulty_level(const FeatureSpace& space, const TaskContext& x) {
  auto f = space.find(kDifficultyFeature);
  if (!f) return 1;
  const auto& label = space.features()[*f].values[x.values[*f]];
  int level = 0;
  auto [p, ec] = std::from_chars(label.data(), label.data() + label.size(), level);
  if (ec != std::errc() || p != label.data() + label.size()) return static_cast<int>(x.values[*f]) + 1;
  return level;
}

}  // namespace detail

/// Success probability of a single agent invocation at x.
inline double step_success(const FeatureSpace& space, const AgentProfile& agent, const TaskContext& x,
                           const RewardModel& model) {
  if (agent.malfunction) {
    if (auto t = space.find(kToolClassFeature)) {
      const auto& tool = space.features()[*t].values.at(x.values.at(*t));
      if (agent.malfunction->broken_tool_classes.count(tool)) return agent.malfunction->floor;
    }
  }
  const auto& domain = value_of(space, x, kDomainFeature);
  const int level = detail::difficulty_level(space, x);
  const double p = competence_at(agent.truth, domain) * std::pow(model.difficulty_decay, level - 1);
  return std::clamp(p, 0.0, 1.0);
}

/// r(x, y): the product of per-step success probabilities. Depends only on
/// the profiles of agents named in y, so adding agents never changes it.
inline double success_prob(const FeatureSpace& space, const AgentPool& pool, const TaskContext& x,
                           const Plan& y, const RewardModel& model) {
  double p = 1.0;
  for (auto s : y.steps) {
    if (s >= pool.size()) throw LookupError("plan step " + std::to_string(s) + " not in pool");
    p *= step_success(space, pool[s], x, model);
  }
  return std::clamp(p, 0.0, 1.0);
}

/// One Bernoulli draw; consumes exactly one variate.
inline int sample_reward(double p, Stream& stream) { return stream.uniform() < p ? 1 : 0; }

}  // namespace monoscale
