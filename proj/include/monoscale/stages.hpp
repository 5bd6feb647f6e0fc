#pragma once

// The cross-stage expansion loop: onboard one agent per stage, synthesize
// warm-up tasks, collect evidence, update memory under the trust region,
// and audit monotonicity. Also the naive and frozen baselines.

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "monoscale/bandit.hpp"
#include "monoscale/errors.hpp"
#include "monoscale/eval.hpp"
#include "monoscale/io.hpp"
#include "monoscale/learn.hpp"
#include "monoscale/presets.hpp"
#include "monoscale/rng.hpp"
#include "monoscale/router.hpp"
#include "monoscale/synth.hpp"
#include "monoscale/world.hpp"

namespace monoscale {

enum class Mode { monoscale, naive, frozen };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::monoscale: return "monoscale";
    case Mode::naive: return "naive";
    case Mode::frozen: return "frozen";
  }
  return "?";
}

inline Mode mode_from_string(std::string_view s) {
  if (s == "monoscale") return Mode::monoscale;
  if (s == "naive") return Mode::naive;
  if (s == "frozen") return Mode::frozen;
  throw ConfigError("unknown mode '" + std::string(s) + "'");
}

/// Which distribution the trust-region update takes expectations under.
enum class UpdateDistribution { deployment, warm };

inline std::string_view to_string(UpdateDistribution d) {
  return d == UpdateDistribution::deployment ? "deployment" : "warm";
}

inline UpdateDistribution update_distribution_from_string(std::string_view s) {
  if (s == "deployment") return UpdateDistribution::deployment;
  if (s == "warm") return UpdateDistribution::warm;
  throw ConfigError("unknown update distribution '" + std::string(s) + "'");
}

struct Scenario {
  std::string preset = "clean_10";
  FeatureSpace space = FeatureSpace::standard();
  ContextDistribution deployment = ContextDistribution::uniform(FeatureSpace::standard());
  std::vector<AgentProfile> initial_pool;
  std::vector<AgentProfile> onboarding;
  Mode mode = Mode::monoscale;
  RouterConfig router;
  RewardModel reward;
  int l_max = 1;
  std::size_t memory_budget = Memory::kDefaultBudget;
  SynthesisConfig synth;
  DistillConfig distill;
  TrustRegionConfig trust;
  UpdateDistribution update_distribution = UpdateDistribution::deployment;
  std::size_t evidence_samples = 400;
  std::uint64_t seed = 0;

  void validate() const {
    router.validate();
    reward.validate();
    synth.validate();
    distill.validate();
    trust.validate();
    if (l_max < 1 || l_max > kMaxPlanLength) throw ConfigError("l_max must lie in [1, 3]");
    if (deployment.size() != space.context_count())
      throw ConfigError("deployment distribution does not match the feature space");
    if (initial_pool.empty()) throw ConfigError("initial pool is empty");
    if (onboarding.empty()) throw ConfigError("onboarding queue is empty");
    std::set<std::string> ids;
    for (const auto& a : initial_pool) ids.insert(a.id);
    for (const auto& a : onboarding) {
      monoscale::validate(a);
      if (!ids.insert(a.id).second) throw ConfigError("onboarding agent '" + a.id + "' duplicates an existing id");
    }
  }

  /// The router the mode runs with. The novelty bonus models the naive
  /// router's pull towards freshly added agents; other modes run without it.
  RouterConfig effective_router() const {
    RouterConfig r = router;
    if (mode != Mode::naive) r.novelty_bonus = 0.0;
    return r;
  }
};

/// Preset scenario: the first three roster agents form the initial pool,
/// the remaining seven are onboarded one per stage.
inline Scenario preset_scenario(const std::string& preset, std::uint64_t seed, Mode mode = Mode::monoscale) {
  Scenario s;
  s.preset = preset;
  s.seed = seed;
  s.mode = mode;
  auto agents = presets::roster(preset, s.space);
  s.initial_pool.assign(agents.begin(), agents.begin() + static_cast<std::ptrdiff_t>(presets::kInitialPoolSize));
  s.onboarding.assign(agents.begin() + static_cast<std::ptrdiff_t>(presets::kInitialPoolSize), agents.end());
  return s;
}

struct StageState {
  int k = 0;
  Bandit bandit;
  Memory memory;
  double j = 0.0;  // exact J of the deployed memory under the deployment distribution
};

struct StageReport {
  int k = 0;
  std::size_t pool_size = 0;
  ChosenKind chosen_kind = ChosenKind::identity;
  double j_before = 0.0;  // J of the conservative fallback (previous J for naive)
  double j_after = 0.0;
  Divergence kl = Divergence::finite(0.0);
  double margin = 0.0;
  std::size_t warm_kept = 0;
  std::size_t warm_tasks = 0;
  std::size_t buffer_n = 0;
  double bridge_residual = 0.0;  // |J(fallback) - J_{k-1}|
  bool estimation_mode = false;  // update used estimated expectations
  double wall_seconds = 0.0;

  double survival_rate() const {
    return warm_tasks ? static_cast<double>(warm_kept) / static_cast<double>(warm_tasks) : 0.0;
  }
};

struct StageResult {
  StageState state;
  StageReport report;
  std::vector<WarmTask> tasks;
  std::optional<UpdateOutcome> update;
};

using EventSink = std::function<void(const Json&)>;

namespace detail {

inline void emit(const EventSink& sink, Json event) {
  if (sink) sink(event);
}

inline Json stage_end_event(const StageReport& r) {
  return {{"event", "stage_end"},
          {"stage", r.k},
          {"pool_size", r.pool_size},
          {"chosen_kind", std::string(to_string(r.chosen_kind))},
          {"j_before", r.j_before},
          {"j_after", r.j_after},
          {"kl", to_json(r.kl)},
          {"margin", r.margin},
          {"bridge_residual", r.bridge_residual},
          {"estimation_mode", r.estimation_mode}};
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

inline StageState initial_state(const Scenario& s) {
  s.validate();
  Bandit bandit(s.space, AgentPool(s.initial_pool), s.reward, s.l_max);
  Memory memory({}, s.memory_budget);
  const double j = exact_J(s.effective_router(), bandit, memory, s.deployment).j;
  return StageState{0, std::move(bandit), std::move(memory), j};
}

inline StageReport stage_zero_report(const StageState& st) {
  StageReport r;
  r.k = st.k;
  r.pool_size = st.bandit.pool().size();
  r.chosen_kind = ChosenKind::identity;
  r.j_before = r.j_after = st.j;
  return r;
}

/// Naive scale-up: expand the pool, leave memory untouched.
inline StageState naive_update(const Scenario& s, const StageState& st, const AgentProfile& new_agent) {
  Bandit bandit = st.bandit.expanded(new_agent);
  const double j = exact_J(s.effective_router(), bandit, st.memory, s.deployment).j;
  return StageState{st.k + 1, std::move(bandit), st.memory, j};
}

/**
 * One expansion stage. In monoscale mode: expand, build the fallback, run
 * synthesis (plan, execute, validate) under the pre-expansion memory on the
 * expanded pool, build the warm distribution, collect evidence, distill
 * rules, enumerate candidates, and take the trust-region update relative to
 * the fallback.
 */
inline StageResult run_stage(const Scenario& s, const StageState& st, const AgentProfile& new_agent,
                             const EventSink& sink = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const int k = st.k + 1;
  const auto router = s.effective_router();
  StageReport rep;
  rep.k = k;
  std::vector<WarmTask> tasks;

  detail::emit(sink, {{"event", "stage_start"},
                      {"stage", k},
                      {"mode", std::string(to_string(s.mode))},
                      {"new_agent", new_agent.id},
                      {"pool_size", st.bandit.pool().size() + 1}});

  if (s.mode == Mode::naive) {
    auto next = naive_update(s, st, new_agent);
    rep.pool_size = next.bandit.pool().size();
    rep.chosen_kind = ChosenKind::identity;
    rep.j_before = st.j;
    rep.j_after = next.j;
    rep.margin = rep.j_after - rep.j_before;
    rep.kl = avg_kl(router, next.bandit, fallback_memory(st.memory, new_agent.id, k), st.memory, s.deployment);
    rep.wall_seconds = detail::seconds_since(t0);
    detail::emit(sink, detail::stage_end_event(rep));
    return StageResult{std::move(next), rep, {}, std::nullopt};
  }

  Bandit bandit = st.bandit.expanded(new_agent);
  const auto& added = bandit.pool().agents().back();
  Memory fallback = fallback_memory(st.memory, added.id, k);
  const double j_fallback = exact_J(router, bandit, fallback, s.deployment).j;
  rep.pool_size = bandit.pool().size();
  rep.j_before = j_fallback;
  rep.bridge_residual = std::abs(j_fallback - st.j);

  if (s.mode == Mode::frozen) {
    rep.chosen_kind = ChosenKind::fallback;
    rep.j_after = j_fallback;
    rep.wall_seconds = detail::seconds_since(t0);
    detail::emit(sink, detail::stage_end_event(rep));
    return StageResult{StageState{k, std::move(bandit), std::move(fallback), j_fallback}, rep, {}, std::nullopt};
  }

  // Synthesis.
  const auto planned = plan_tasks_detailed(s.space, added, s.synth, Stream::derive(s.seed, k, "synth.plan"));
  const auto exec_stream = Stream::derive(s.seed, k, "synth.execute");
  ExperienceBuffer buffer;
  buffer.stage = k;
  for (std::size_t i = 0; i < planned.size(); ++i) {
    auto task = execute_task(router, bandit, st.memory, planned[i].context, s.synth, exec_stream.substream(i, "task"));
    task = validate_task(bandit, std::move(task), s.synth);
    if (task.kept)
      for (const auto& r : task.rollouts) buffer.add({task.context, r.plan, r.reward});
    Json ev = {{"event", "synth_task"}, {"stage", k}, {"index", i}, {"probe", std::string(to_string(planned[i].probe))}};
    const Json body = to_json(s.space, bandit.pool(), task);
    for (const auto& [key, val] : body.items()) ev[key] = val;
    detail::emit(sink, std::move(ev));
    tasks.push_back(std::move(task));
  }
  const auto warm = build_warm_distribution(s.space, tasks, s.deployment, s.synth);
  rep.warm_tasks = tasks.size();
  rep.warm_kept = warm.kept;

  // Evidence.
  if (!warm.degenerate && s.evidence_samples > 0) {
    auto more = collect_evidence(router, bandit, st.memory, warm.dist, s.evidence_samples,
                                 Stream::derive(s.seed, k, "evidence"), k);
    for (auto& r : more.records) buffer.add(std::move(r));
  }
  rep.buffer_n = buffer.size();
  const auto rules = buffer.empty() ? std::vector<MemoryEntry>{} : distill_rules(buffer, s.space, bandit.pool(), s.distill);
  detail::emit(sink, {{"event", "evidence"},
                      {"stage", k},
                      {"warm_kept", warm.kept},
                      {"warm_degenerate", warm.degenerate},
                      {"buffer_n", buffer.size()},
                      {"rules", rules.size()}});

  // Update.
  const auto candidates = enumerate_candidates(bandit, st.memory, rules, s.trust, added.id, k);
  ContextDistribution update_dist = s.deployment;
  if (s.trust.evaluation == TrustRegionConfig::Evaluation::empirical) {
    auto stream = Stream::derive(s.seed, k, "empirical");
    std::vector<double> counts(warm.dist.size(), 0.0);
    for (std::size_t i = 0; i < s.trust.empirical_samples; ++i) counts[warm.dist.sample(stream)] += 1.0;
    update_dist = ContextDistribution::normalized(std::move(counts));
    rep.estimation_mode = true;
  } else if (s.update_distribution == UpdateDistribution::warm) {
    update_dist = warm.dist;
    rep.estimation_mode = true;
  }
  auto outcome = trust_region_update(router, bandit, st.memory, candidates, update_dist, s.trust);

  Json summary = Json::array();
  for (std::size_t i = 0; i < outcome.evaluations.size(); ++i) {
    const auto& e = outcome.evaluations[i];
    detail::emit(sink, {{"event", "candidate_eval"},
                        {"stage", k},
                        {"index", i},
                        {"id", e.id},
                        {"surrogate", e.surrogate},
                        {"j", e.j},
                        {"kl", to_json(e.kl)},
                        {"feasible", e.feasible}});
    summary.push_back({{"id", e.id}, {"surrogate", e.surrogate}, {"kl", to_json(e.kl)}, {"feasible", e.feasible}});
  }
  detail::emit(sink, {{"event", "update"},
                      {"stage", k},
                      {"delta", s.trust.delta},
                      {"baseline_j", outcome.baseline_j},
                      {"chosen_index", outcome.chosen_index},
                      {"chosen_id", outcome.evaluations[outcome.chosen_index].id},
                      {"chosen_kind", std::string(to_string(outcome.chosen_kind))},
                      {"candidates", std::move(summary)}});

  rep.chosen_kind = outcome.chosen_kind;
  rep.kl = outcome.evaluations[outcome.chosen_index].kl;
  rep.j_after = rep.estimation_mode ? exact_J(router, bandit, outcome.chosen, s.deployment).j
                                    : outcome.evaluations[outcome.chosen_index].j;
  rep.margin = rep.j_after - rep.j_before;
  rep.wall_seconds = detail::seconds_since(t0);
  detail::emit(sink, detail::stage_end_event(rep));
  auto memory = outcome.chosen;
  return StageResult{StageState{k, std::move(bandit), std::move(memory), rep.j_after}, rep, std::move(tasks),
                     std::move(outcome)};
}

/// Called after each stage (including stage 0, with no update) so callers can
/// persist memories and tasks.
using StageObserver = std::function<void(const StageResult&)>;

/// Stage 0 then one stage per onboarded agent, starting after `from`.
inline std::vector<StageReport> run_scenario(const Scenario& s, const EventSink& sink = {},
                                             const StageObserver& observer = {},
                                             std::optional<StageState> from = std::nullopt) {
  std::vector<StageReport> reports;
  const bool fresh = !from.has_value();
  std::optional<StageState> cur = fresh ? std::optional<StageState>(initial_state(s)) : std::move(from);
  StageState& st = *cur;
  if (fresh) {
    StageResult zero{st, stage_zero_report(st), {}, std::nullopt};
    detail::emit(sink, {{"event", "stage_start"},
                        {"stage", 0},
                        {"mode", std::string(to_string(s.mode))},
                        {"new_agent", nullptr},
                        {"pool_size", st.bandit.pool().size()}});
    detail::emit(sink, detail::stage_end_event(zero.report));
    if (observer) observer(zero);
    reports.push_back(zero.report);
  }
  for (std::size_t i = static_cast<std::size_t>(st.k); i < s.onboarding.size(); ++i) {
    std::optional<StageResult> r;
    try {
      r = run_stage(s, st, s.onboarding[i], sink);
    } catch (const EmptySupport& e) {
      throw EmptySupport("stage " + std::to_string(st.k + 1) + ": " + e.context());
    }
    if (observer) observer(*r);
    reports.push_back(r->report);
    st = std::move(r->state);
  }
  return reports;
}

/// Rebuilds the state after stage k from the scenario and a stored memory:
/// the pool is the initial pool plus the first k onboarded agents.
inline StageState resume_state(const Scenario& s, int k, Memory memory) {
  s.validate();
  if (k < 0 || static_cast<std::size_t>(k) > s.onboarding.size())
    throw ConfigError("resume stage " + std::to_string(k) + " outside [0, " + std::to_string(s.onboarding.size()) + "]");
  AgentPool pool(s.initial_pool);
  for (int i = 0; i < k; ++i) pool = expand_pool(pool, s.onboarding[static_cast<std::size_t>(i)]);
  Bandit bandit(s.space, std::move(pool), s.reward, s.l_max);
  const double j = exact_J(s.effective_router(), bandit, memory, s.deployment).j;
  return StageState{k, std::move(bandit), std::move(memory), j};
}

inline constexpr double kMonotoneTolerance = 1e-12;

struct AuditResult {
  bool pass = true;
  std::optional<int> stage;   // first violating stage
  double margin = 0.0;        // its margin
  bool estimation_mode = false;  // the violation came from an estimated update
};

/// Passes iff every stage margin is >= -1e-12; reports the first violation.
inline AuditResult audit_monotonicity(const std::vector<StageReport>& reports) {
  if (reports.size() < 2) throw ConfigError("monotonicity audit needs at least 2 stage reports");
  for (const auto& r : reports)
    if (r.margin < -kMonotoneTolerance) return {false, r.k, r.margin, r.estimation_mode};
  return {};
}

}  // namespace monoscale
