#pragma once

// Expansion-aware warm-up task synthesis: a planner conditioned on the new
// agent's card, an executor that runs the current router, and a validator
// that keeps only solvable tasks with at least one successful rollout.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "monoscale/bandit.hpp"
#include "monoscale/errors.hpp"
#include "monoscale/eval.hpp"
#include "monoscale/rng.hpp"
#include "monoscale/router.hpp"
#include "monoscale/world.hpp"

namespace monoscale {

struct SynthesisConfig {
  int n_tasks = 50;
  int n_rollouts = 4;
  double boundary_fraction = 0.4;
  double offpool_fraction = 0.2;
  double solvable_threshold = 0.5;
  double warm_mix = 0.7;

  void validate() const {
    if (n_tasks < 0) throw ConfigError("synthesis n_tasks must be nonnegative");
    if (n_rollouts < 1) throw ConfigError("synthesis n_rollouts must be at least 1");
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(boundary_fraction) || !unit(offpool_fraction) ||
        boundary_fraction + offpool_fraction > 1.0 + 1e-12)
      throw ConfigError("boundary_fraction and offpool_fraction must lie in [0,1] and sum to at most 1");
    if (!(solvable_threshold > 0.0 && solvable_threshold <= 1.0))
      throw ConfigError("solvable_threshold must lie in (0, 1]");
    if (!unit(warm_mix)) throw ConfigError("warm_mix must lie in [0, 1]");
  }

  bool operator==(const SynthesisConfig&) const = default;
};

/// Which slice of the new agent's card a planned task probes.
enum class ProbeKind { boundary, offpool, strength };

inline std::string_view to_string(ProbeKind k) {
  switch (k) {
    case ProbeKind::boundary: return "boundary";
    case ProbeKind::offpool: return "offpool";
    case ProbeKind::strength: return "strength";
  }
  return "?";
}

enum class RejectReason { unsolvable, all_fail };

inline std::string_view to_string(RejectReason r) { return r == RejectReason::unsolvable ? "unsolvable" : "all_fail"; }

struct Rollout {
  Plan plan;
  int reward = 0;

  bool operator==(const Rollout&) const = default;
};

struct WarmTask {
  TaskContext context;
  std::vector<Rollout> rollouts;
  Plan oracle_best;
  double oracle_best_probability = 0.0;
  bool kept = false;
  std::optional<RejectReason> reject_reason;

  bool operator==(const WarmTask&) const = default;
};

/// Domains of the space split into terciles by the agent's card value
/// (ascending, ties in declared order): weakest, middle, strongest.
struct CardTerciles {
  std::vector<std::string> weakest;
  std::vector<std::string> middle;
  std::vector<std::string> strongest;
};

inline CardTerciles card_terciles(const FeatureSpace& space, const AgentProfile& agent) {
  auto domains = space.domains();
  if (domains.empty()) throw ConfigError("task synthesis needs a 'domain' feature");
  std::stable_sort(domains.begin(), domains.end(), [&](const auto& a, const auto& b) {
    return competence_at(agent.card, a) < competence_at(agent.card, b);
  });
  const std::size_t n = domains.size();
  const std::size_t lo = n / 3;
  const std::size_t hi = n - n / 3;
  CardTerciles t;
  t.weakest.assign(domains.begin(), domains.begin() + static_cast<std::ptrdiff_t>(std::max<std::size_t>(lo, 1)));
  t.middle.assign(domains.begin() + static_cast<std::ptrdiff_t>(lo), domains.begin() + static_cast<std::ptrdiff_t>(hi));
  t.strongest.assign(domains.begin() + static_cast<std::ptrdiff_t>(std::min(hi, n - 1)), domains.end());
  if (t.middle.empty()) t.middle = t.strongest;
  return t;
}

/// Number of tasks of each probe kind: boundary and off-pool shares are
/// rounded, the remainder probes strengths.
inline std::array<int, 3> probe_counts(const SynthesisConfig& cfg) {
  const int boundary = static_cast<int>(std::lround(cfg.n_tasks * cfg.boundary_fraction));
  const int offpool = std::min(cfg.n_tasks - boundary, static_cast<int>(std::lround(cfg.n_tasks * cfg.offpool_fraction)));
  return {boundary, offpool, cfg.n_tasks - boundary - offpool};
}

struct PlannedTask {
  TaskContext context;
  ProbeKind probe;
};

/**
 * Proposes n_tasks contexts around the new agent's card. Boundary tasks come
 * from its middle-tercile domains, off-pool tasks from its weakest, the rest
 * from its strongest. Within a tercile the domain is drawn with probability
 * proportional to card value (uniform if all are zero); every other feature
 * is drawn uniformly.
 */
inline std::vector<PlannedTask> plan_tasks_detailed(const FeatureSpace& space, const AgentProfile& new_agent,
                                                    const SynthesisConfig& cfg, Stream stream) {
  cfg.validate();
  const auto terciles = card_terciles(space, new_agent);
  const auto counts = probe_counts(cfg);
  const auto domain_f = space.index_of(kDomainFeature);
  const auto& fs = space.features();

  auto draw_domain = [&](const std::vector<std::string>& group) {
    std::vector<double> w;
    for (const auto& d : group) w.push_back(competence_at(new_agent.card, d));
    if (std::all_of(w.begin(), w.end(), [](double v) { return v <= 0.0; })) std::fill(w.begin(), w.end(), 1.0);
    return group[stream.categorical(w)];
  };

  std::vector<PlannedTask> out;
  out.reserve(static_cast<std::size_t>(cfg.n_tasks));
  const std::array<std::pair<ProbeKind, const std::vector<std::string>*>, 3> groups{{
      {ProbeKind::boundary, &terciles.middle},
      {ProbeKind::offpool, &terciles.weakest},
      {ProbeKind::strength, &terciles.strongest},
  }};
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (int i = 0; i < counts[g]; ++i) {
      TaskContext x{std::vector<std::uint32_t>(fs.size(), 0)};
      for (std::size_t f = 0; f < fs.size(); ++f) {
        if (f == domain_f)
          x.values[f] = static_cast<std::uint32_t>(space.value_index(f, draw_domain(*groups[g].second)));
        else
          x.values[f] = static_cast<std::uint32_t>(stream.index(fs[f].values.size()));
      }
      out.push_back({std::move(x), groups[g].first});
    }
  }
  return out;
}

inline std::vector<TaskContext> plan_tasks(const FeatureSpace& space, const AgentProfile& new_agent,
                                           const SynthesisConfig& cfg, Stream stream) {
  std::vector<TaskContext> out;
  for (auto& t : plan_tasks_detailed(space, new_agent, cfg, std::move(stream))) out.push_back(std::move(t.context));
  return out;
}

/// Runs n_rollouts independent (plan ~ pi, reward ~ Bernoulli) pairs at x,
/// rollout i drawing from substream i.
inline WarmTask execute_task(const RouterConfig& config, const Bandit& bandit, const Memory& memory,
                             const TaskContext& x, const SynthesisConfig& cfg, const Stream& stream) {
  const auto ci = context_index(bandit.space(), x);
  const auto pi = policy_distribution(config, bandit, memory, ci);
  WarmTask task;
  task.context = x;
  for (int i = 0; i < cfg.n_rollouts; ++i) {
    auto sub = stream.substream(static_cast<std::uint64_t>(i), "rollout");
    const auto y = sub.categorical(pi);
    task.rollouts.push_back({bandit.plans()[y], sample_reward(bandit.reward(ci, y), sub)});
  }
  return task;
}

/// Solvability gate first (best plan probability >= p_solve), then the
/// all-rollouts-failed filter.
inline WarmTask validate_task(const Bandit& bandit, WarmTask task, const SynthesisConfig& cfg) {
  const auto ci = context_index(bandit.space(), task.context);
  const auto& r = bandit.rewards(ci);
  const auto best = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
  task.oracle_best = bandit.plans()[best];
  task.oracle_best_probability = r[best];
  task.kept = false;
  task.reject_reason.reset();
  if (r[best] < cfg.solvable_threshold)
    task.reject_reason = RejectReason::unsolvable;
  else if (std::none_of(task.rollouts.begin(), task.rollouts.end(), [](const auto& ro) { return ro.reward == 1; }))
    task.reject_reason = RejectReason::all_fail;
  else
    task.kept = true;
  return task;
}

struct WarmDistribution {
  ContextDistribution dist;
  std::size_t kept = 0;
  bool degenerate = false;  // no kept tasks: dist is the deployment distribution
};

/// lambda * uniform(kept contexts, duplicates merged) + (1 - lambda) * D.
inline WarmDistribution build_warm_distribution(const FeatureSpace& space, const std::vector<WarmTask>& tasks,
                                                const ContextDistribution& deployment, const SynthesisConfig& cfg) {
  std::vector<std::size_t> kept;
  for (const auto& t : tasks)
    if (t.kept) kept.push_back(context_index(space, t.context));
  if (kept.empty()) return {deployment, 0, true};
  const double lambda = cfg.warm_mix;
  if (lambda == 0.0) return {deployment, kept.size(), false};
  std::vector<double> w(deployment.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = (1.0 - lambda) * deployment[i];
  const double share = lambda / static_cast<double>(kept.size());
  for (auto i : kept) w[i] += share;
  return {ContextDistribution::normalized(std::move(w)), kept.size(), false};
}

}  // namespace monoscale
