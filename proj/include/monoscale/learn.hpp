#pragma once

// Evidence collection, rule distillation, semantic-conflict checks,
// candidate enumeration with the guaranteed fallback, and the trust-region
// constrained memory update.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "monoscale/bandit.hpp"
#include "monoscale/errors.hpp"
#include "monoscale/eval.hpp"
#include "monoscale/rng.hpp"
#include "monoscale/router.hpp"
#include "monoscale/synth.hpp"

namespace monoscale {

struct Experience {
  TaskContext context;
  Plan plan;
  int reward = 0;
};

/// Warm-up interactions of one stage.
struct ExperienceBuffer {
  int stage = 0;
  std::vector<Experience> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }

  void add(Experience e) {
    if (e.reward != 0 && e.reward != 1) throw ConfigError("experience rewards must be 0 or 1");
    records.push_back(std::move(e));
  }
};

/// Attribution key: (agent id, domain, tool_class). tool_class is empty when
/// the space has no such feature.
using EvidenceKey = std::tuple<std::string, std::string, std::string>;

struct EvidenceCount {
  int n = 0;
  int successes = 0;

  double rate() const { return n ? static_cast<double>(successes) / n : 0.0; }
};

/**
 * Per (agent, domain, tool_class) counts. A record is credited once to each
 * distinct agent its plan invokes.
 */
inline std::map<EvidenceKey, EvidenceCount> tally(const ExperienceBuffer& buffer, const FeatureSpace& space,
                                                  const AgentPool& pool) {
  std::map<EvidenceKey, EvidenceCount> out;
  const bool has_tool = space.find(kToolClassFeature).has_value();
  for (const auto& r : buffer.records) {
    const auto& domain = value_of(space, r.context, kDomainFeature);
    const std::string tool = has_tool ? value_of(space, r.context, kToolClassFeature) : std::string();
    std::vector<std::size_t> seen;
    for (auto a : r.plan.steps) {
      if (std::find(seen.begin(), seen.end(), a) != seen.end()) continue;
      seen.push_back(a);
      auto& c = out[{pool[a].id, domain, tool}];
      ++c.n;
      c.successes += r.reward;
    }
  }
  return out;
}

/// n i.i.d. records: x ~ warm, y ~ pi_memory(.|x), r ~ Bernoulli(r(x,y)).
inline ExperienceBuffer collect_evidence(const RouterConfig& config, const Bandit& bandit, const Memory& memory,
                                         const ContextDistribution& warm, std::size_t n, Stream stream, int stage = 0) {
  if (n < 1) throw ConfigError("collect_evidence needs n >= 1");
  ExperienceBuffer buf;
  buf.stage = stage;
  std::vector<std::optional<std::vector<double>>> cache(warm.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = warm.sample(stream);
    if (!cache[x]) cache[x] = policy_distribution(config, bandit, memory, x);
    const auto y = stream.categorical(*cache[x]);
    buf.add({bandit.contexts()[x], bandit.plans()[y], sample_reward(bandit.reward(x, y), stream)});
  }
  return buf;
}

struct DistillConfig {
  int n_min = 5;
  double theta_pos = 0.8;
  double theta_neg = 0.2;
  double forbid_cut = 0.05;
  double boost_magnitude = 1.0;
  double penalize_magnitude = 1.0;

  void validate() const {
    if (n_min < 1) throw ConfigError("distill n_min must be at least 1");
    if (!(0.0 <= forbid_cut && forbid_cut <= theta_neg && theta_neg < theta_pos && theta_pos <= 1.0))
      throw ConfigError("distill thresholds must satisfy 0 <= forbid_cut <= theta_neg < theta_pos <= 1");
    if (!(boost_magnitude >= 0.0 && penalize_magnitude >= 0.0))
      throw ConfigError("distill magnitudes must be nonnegative");
  }

  bool operator==(const DistillConfig&) const = default;
};

/**
 * Turns well-supported success and failure rates into rules. Groups with at
 * least n_min records become a boost (rate >= theta_pos), a penalize
 * (rate <= theta_neg) or a forbid (rate <= forbid_cut). Rules carry the
 * buffer's stage as priority, so newer evidence overrides older rules on
 * the same agent and context slice. Sorted by evidence count, descending.
 */
inline std::vector<MemoryEntry> distill_rules(const ExperienceBuffer& buffer, const FeatureSpace& space,
                                              const AgentPool& pool, const DistillConfig& cfg) {
  cfg.validate();
  std::vector<MemoryEntry> out;
  for (const auto& [key, count] : tally(buffer, space, pool)) {
    if (count.n < cfg.n_min) continue;
    const auto& [agent, domain, tool] = key;
    const double rate = count.rate();
    RuleEffect effect;
    if (rate <= cfg.forbid_cut)
      effect = {EffectKind::forbid, 1.0};
    else if (rate <= cfg.theta_neg)
      effect = {EffectKind::penalize, cfg.penalize_magnitude};
    else if (rate >= cfg.theta_pos)
      effect = {EffectKind::boost, cfg.boost_magnitude};
    else
      continue;

    MemoryEntry e;
    const std::string slice = "domain=" + domain + (tool.empty() ? "" : ",tool_class=" + tool);
    e.id = "s" + std::to_string(buffer.stage) + ":" + std::string(to_string(effect.kind)) + ":" + agent + ":" + domain +
           (tool.empty() ? "" : ":" + tool);
    char rate_buf[32];
    std::snprintf(rate_buf, sizeof rate_buf, "%.3g", rate);
    e.title = std::string(to_string(effect.kind)) + " " + agent + " on " + slice + " (success " + rate_buf + " over " +
              std::to_string(count.n) + ")";
    e.condition.allowed[std::string(kDomainFeature)] = {domain};
    if (!tool.empty()) e.condition.allowed[std::string(kToolClassFeature)] = {tool};
    e.target_agent = agent;
    e.effect = effect;
    e.priority = buffer.stage;
    e.confidence = std::min(1.0, std::abs(rate - 0.5) * 2.0);
    e.provenance = {buffer.stage, count.n, rate};
    out.push_back(std::move(e));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.provenance.evidence_count > b.provenance.evidence_count;
  });
  return out;
}

enum class Conflict { compatible, reconciled, irreconcilable };

inline std::string_view to_string(Conflict c) {
  switch (c) {
    case Conflict::compatible: return "compatible";
    case Conflict::reconciled: return "reconciled";
    case Conflict::irreconcilable: return "irreconcilable";
  }
  return "?";
}

/// Semantic trust region: opposite-sign rules on the same agent over
/// overlapping conditions are irreconcilable at equal priority and
/// reconciled when priorities differ. Reports the worst case found.
inline Conflict check_conflicts(const Memory& existing, const MemoryEntry& entry) {
  Conflict worst = Conflict::compatible;
  for (const auto& e : existing.entries()) {
    if (e.target_agent != entry.target_agent || !intersects(e.condition, entry.condition)) continue;
    if (e.effect.sign() == entry.effect.sign()) continue;
    if (e.priority == entry.priority) return Conflict::irreconcilable;
    worst = Conflict::reconciled;
  }
  return worst;
}

struct TrustRegionConfig {
  enum class Evaluation { exact, empirical };

  double delta = 0.05;
  std::size_t candidate_cap = 32;
  Evaluation evaluation = Evaluation::exact;
  std::size_t empirical_samples = 500;
  // Non-fallback candidates keep the new agent behind a guard entry.
  bool scoped_onboarding = true;

  void validate() const {
    if (!(delta > 0.0)) throw ConfigError("trust region delta must be positive");
    if (candidate_cap < 1) throw ConfigError("candidate_cap must be at least 1");
    if (evaluation == Evaluation::empirical && empirical_samples < 1)
      throw ConfigError("empirical_samples must be at least 1");
  }

  bool operator==(const TrustRegionConfig&) const = default;
};

inline std::string_view to_string(TrustRegionConfig::Evaluation e) {
  return e == TrustRegionConfig::Evaluation::exact ? "exact" : "empirical";
}

inline TrustRegionConfig::Evaluation evaluation_from_string(std::string_view s) {
  if (s == "exact") return TrustRegionConfig::Evaluation::exact;
  if (s == "empirical") return TrustRegionConfig::Evaluation::empirical;
  throw ConfigError("unknown evaluation mode '" + std::string(s) + "'");
}

struct Candidate {
  std::string id;
  Memory memory;
};

/**
 * U_k: the fallback first, then base + {r_i} for every rule, then greedy
 * prefixes base + {r_1..r_j} for j >= 2. With a new agent and
 * scoped_onboarding, every non-fallback candidate also carries the agent's
 * guard entry, so rules at `stage` open it only inside their own condition.
 * Candidates holding an
 * irreconcilable pair, exceeding the budget, or leaving some context with no
 * allowed plan are dropped; the list is cut to candidate_cap. The fallback
 * is never dropped. Without a new agent the first candidate is `base`
 * itself (the identity update).
 */
inline std::vector<Candidate> enumerate_candidates(const Bandit& bandit, const Memory& base,
                                                   const std::vector<MemoryEntry>& rules, const TrustRegionConfig& cfg,
                                                   const std::optional<std::string>& new_agent, int stage = 0) {
  std::vector<Candidate> out;
  if (new_agent)
    out.push_back({"fallback", fallback_memory(base, *new_agent, stage)});
  else
    out.push_back({"identity", base});

  // Extends `m` by `rule`, or nullopt if the result would be rejected.
  auto extend = [&](const Memory& m, const MemoryEntry& rule) -> std::optional<Memory> {
    if (m.contains(rule.id)) return std::nullopt;
    if (check_conflicts(m, rule) == Conflict::irreconcilable) return std::nullopt;
    if (m.budgeted_size() + 1 > m.budget()) return std::nullopt;
    return m.with(rule);
  };
  auto admit = [&](std::string id, const Memory& m) {
    if (out.size() < cfg.candidate_cap && has_full_support(bandit, m)) out.push_back({std::move(id), m});
  };

  Memory start = base;
  if (new_agent && cfg.scoped_onboarding) {
    auto guarded = extend(base, guard_entry(*new_agent, stage));
    if (!guarded) return out;
    start = std::move(*guarded);
  }

  for (const auto& r : rules)
    if (auto m = extend(start, r)) admit("single:" + r.id, *m);

  std::optional<Memory> prefix = start;
  for (std::size_t j = 0; j < rules.size() && prefix; ++j) {
    prefix = extend(*prefix, rules[j]);
    if (prefix && j >= 1) admit("prefix:" + std::to_string(j + 1), *prefix);
  }
  return out;
}

enum class ChosenKind { candidate, fallback, identity };

inline std::string_view to_string(ChosenKind k) {
  switch (k) {
    case ChosenKind::candidate: return "candidate";
    case ChosenKind::fallback: return "fallback";
    case ChosenKind::identity: return "identity";
  }
  return "?";
}

struct CandidateEvaluation {
  std::string id;
  double surrogate = 0.0;  // L relative to the baseline
  double j = 0.0;          // J recomputed directly under the same distribution
  Divergence kl = Divergence::finite(0.0);
  bool feasible = false;
};

struct UpdateOutcome {
  Memory chosen;
  std::size_t chosen_index = 0;
  ChosenKind chosen_kind = ChosenKind::fallback;
  std::vector<CandidateEvaluation> evaluations;
  double baseline_j = 0.0;
};

/**
 * argmax over candidates of the surrogate L relative to candidates[0]
 * subject to E_x KL(pi_baseline || pi_candidate) <= delta. Ties go to the
 * lowest index. candidates[0] always has KL 0 and is always feasible.
 * `base` is the pre-update memory; the outcome is tagged identity when the
 * chosen memory equals it.
 */
inline UpdateOutcome trust_region_update(const RouterConfig& config, const Bandit& bandit, const Memory& base,
                                         const std::vector<Candidate>& candidates, const ContextDistribution& dist,
                                         const TrustRegionConfig& cfg) {
  cfg.validate();
  if (candidates.empty()) throw ConfigError("trust_region_update needs at least the fallback candidate");
  const auto& baseline = candidates.front().memory;
  UpdateOutcome out;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const auto s = surrogate(config, bandit, baseline, c.memory, dist);
    CandidateEvaluation ev{c.id, s.l, s.j_candidate, avg_kl(config, bandit, baseline, c.memory, dist), false};
    ev.feasible = ev.kl.within(cfg.delta);
    if (i == 0) out.baseline_j = s.j_base;
    if (ev.feasible && (!best || ev.surrogate > out.evaluations[*best].surrogate)) best = i;
    out.evaluations.push_back(std::move(ev));
  }
  // The baseline compared with itself has zero divergence.
  if (!best) throw Error("no feasible candidate: the baseline itself failed the trust region");
  out.chosen_index = *best;
  out.chosen = candidates[*best].memory;
  if (out.chosen == base)
    out.chosen_kind = ChosenKind::identity;
  else
    out.chosen_kind = *best == 0 ? ChosenKind::fallback : ChosenKind::candidate;
  return out;
}

}  // namespace monoscale
