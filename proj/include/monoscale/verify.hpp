#pragma once

// Numerical checks of the surrogate identity, the expansion bridge,
// stage-wise monotonicity, fallback feasibility and KL behaviour.

#include <cstdint>
#include <string>
#include <vector>

#include "monoscale/errors.hpp"
#include "monoscale/eval.hpp"
#include "monoscale/instance_gen.hpp"
#include "monoscale/stages.hpp"

namespace monoscale {

inline constexpr double kSurrogateTolerance = 1e-10;
inline constexpr double kBridgeTolerance = 1e-12;

struct CheckFailure {
  std::uint64_t seed = 0;  // replays the failing trial
  std::string detail;
};

struct CheckResult {
  std::string name;
  std::size_t trials = 0;
  double worst = 0.0;  // largest residual seen, where the check has one
  std::vector<CheckFailure> failures;

  bool pass() const { return failures.empty(); }
};

inline const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names = {"surrogate", "bridge", "monotone", "fallback", "kl"};
  return names;
}

/// Seed of trial i under master seed s.
inline std::uint64_t trial_seed(std::uint64_t master, std::size_t i) {
  return Stream::derive(master, i, "verify").seed();
}

inline CheckResult check_surrogate(std::size_t trials, std::uint64_t master) {
  CheckResult r{"surrogate", trials, 0.0, {}};
  for (std::size_t i = 0; i < trials; ++i) {
    const auto seed = trial_seed(master, i);
    const auto inst = random_instance(seed);
    const auto s = surrogate(inst.router, inst.bandit, inst.base, inst.candidate, inst.dist);
    r.worst = std::max(r.worst, s.residual());
    if (!(s.residual() <= kSurrogateTolerance))
      r.failures.push_back({seed, "residual " + std::to_string(s.residual())});
  }
  return r;
}

inline CheckResult check_bridge(std::size_t trials, std::uint64_t master) {
  CheckResult r{"bridge", trials, 0.0, {}};
  for (std::size_t i = 0; i < trials; ++i) {
    const auto seed = trial_seed(master, i);
    const auto inst = random_instance(seed);
    const double before = exact_J(inst.router, inst.bandit, inst.base, inst.dist).j;
    const auto grown = inst.bandit.expanded(inst.extra);
    const double after = exact_J(inst.router, grown, fallback_memory(inst.base, inst.extra.id), inst.dist).j;
    const double gap = std::abs(after - before);
    r.worst = std::max(r.worst, gap);
    if (!(gap <= kBridgeTolerance)) r.failures.push_back({seed, "gap " + std::to_string(gap)});
  }
  return r;
}

/// Preset scenarios alternating clean_10 / malfunctioning_10 in `mode`.
/// Naive runs use novelty bonus 0.5.
inline CheckResult check_monotone(std::size_t trials, std::uint64_t master, Mode mode = Mode::monoscale) {
  CheckResult r{"monotone", trials, 0.0, {}};
  for (std::size_t i = 0; i < trials; ++i) {
    const auto seed = trial_seed(master, i);
    const std::string preset = i % 2 == 0 ? "clean_10" : "malfunctioning_10";
    auto s = preset_scenario(preset, seed, mode);
    s.router.novelty_bonus = 0.5;
    const auto audit = audit_monotonicity(run_scenario(s));
    if (!audit.pass) {
      r.worst = std::min(r.worst, audit.margin);
      r.failures.push_back({seed, preset + " stage " + std::to_string(*audit.stage) + " margin " +
                                      std::to_string(audit.margin)});
    }
  }
  return r;
}

/// KL(fallback || fallback) = 0 and the fallback is feasible for any delta.
inline CheckResult check_fallback(std::size_t trials, std::uint64_t master) {
  CheckResult r{"fallback", trials, 0.0, {}};
  for (std::size_t i = 0; i < trials; ++i) {
    const auto seed = trial_seed(master, i);
    const auto inst = random_instance(seed);
    const auto grown = inst.bandit.expanded(inst.extra);
    const auto fb = fallback_memory(inst.base, inst.extra.id);
    const auto kl = avg_kl(inst.router, grown, fb, fb, inst.dist);
    TrustRegionConfig cfg;
    cfg.delta = 1e-300;
    const auto out = trust_region_update(inst.router, grown, inst.base, {{"fallback", fb}}, inst.dist, cfg);
    const bool ok = !kl.is_infinite() && kl.nats() == 0.0 && out.chosen_index == 0 && out.evaluations[0].feasible;
    if (!ok) r.failures.push_back({seed, "fallback kl " + kl.str()});
  }
  return r;
}

/// avg_kl is nonnegative, zero on identical memories, and INFINITE when
/// the second policy forbids plans the first one uses.
inline CheckResult check_kl(std::size_t trials, std::uint64_t master) {
  CheckResult r{"kl", trials, 0.0, {}};
  for (std::size_t i = 0; i < trials; ++i) {
    const auto seed = trial_seed(master, i);
    const auto inst = random_instance(seed);
    const auto& b = inst.bandit;
    const auto pq = avg_kl(inst.router, b, inst.base, inst.candidate, inst.dist);
    const auto pp = avg_kl(inst.router, b, inst.base, inst.base, inst.dist);
    // INF needs a witness: a weighted context where the candidate drops a plan the base uses.
    bool witness = false;
    for (std::size_t x = 0; x < b.contexts().size() && !witness; ++x) {
      if (inst.dist[x] == 0.0) continue;
      const auto p = policy_distribution(inst.router, b, inst.base, x);
      const auto q = policy_distribution(inst.router, b, inst.candidate, x);
      for (std::size_t y = 0; y < p.size(); ++y) witness = witness || (p[y] > 0.0 && q[y] == 0.0);
    }
    if (pq.is_infinite() != witness || (!pq.is_infinite() && pq.nats() < 0.0))
      r.failures.push_back({seed, "KL(base||cand) = " + pq.str()});
    if (pp.is_infinite() || pp.nats() != 0.0) r.failures.push_back({seed, "KL(base||base) = " + pp.str()});

    const auto grown = b.expanded(inst.extra);
    const auto fb = fallback_memory(inst.base, inst.extra.id);
    const auto forward = avg_kl(inst.router, grown, inst.base, fb, inst.dist);
    const auto backward = avg_kl(inst.router, grown, fb, inst.base, inst.dist);
    if (!forward.is_infinite()) r.failures.push_back({seed, "KL(open||fallback) = " + forward.str() + ", want INF"});
    if (backward.is_infinite() || backward.nats() < 0.0)
      r.failures.push_back({seed, "KL(fallback||open) = " + backward.str()});
  }
  return r;
}

/// Runs one named check; unknown names are a ConfigError.
inline CheckResult run_check(const std::string& name, std::size_t trials, std::uint64_t master,
                             Mode mode = Mode::monoscale) {
  if (trials < 1) throw ConfigError("verify needs at least one trial");
  if (name == "surrogate") return check_surrogate(trials, master);
  if (name == "bridge") return check_bridge(trials, master);
  if (name == "monotone") return check_monotone(trials, master, mode);
  if (name == "fallback") return check_fallback(trials, master);
  if (name == "kl") return check_kl(trials, master);
  throw ConfigError("unknown check '" + name + "'");
}

}  // namespace monoscale
