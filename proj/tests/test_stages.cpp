#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace monoscale;
using namespace testing_helpers;

namespace {

Competence flat(double v) {
  Competence c;
  for (const auto& d : FeatureSpace::standard().domains()) c[d] = v;
  return c;
}

Scenario single_onboarding(AgentProfile agent) {
  auto s = preset_scenario("clean_10", 0);
  s.onboarding = {std::move(agent)};
  return s;
}

std::vector<StageResult> collect(const Scenario& s) {
  std::vector<StageResult> out;
  run_scenario(s, {}, [&](const StageResult& r) { out.push_back(r); });
  return out;
}

}  // namespace

TEST(Scenario, PresetShape) {
  const auto s = preset_scenario("malfunctioning_10", 4, Mode::naive);
  EXPECT_EQ(s.initial_pool.size(), 3u);
  EXPECT_EQ(s.onboarding.size(), 7u);
  EXPECT_EQ(s.seed, 4u);
  EXPECT_TRUE(s.onboarding[1].malfunction.has_value());
  EXPECT_NO_THROW(s.validate());
  EXPECT_THROW(preset_scenario("dirty_5", 0), ConfigError);
}

TEST(Scenario, Validation) {
  auto s = preset_scenario("clean_10", 0);
  s.onboarding.clear();
  EXPECT_THROW(s.validate(), ConfigError);
  s = preset_scenario("clean_10", 0);
  s.onboarding.push_back(s.initial_pool[0]);
  EXPECT_THROW(s.validate(), ConfigError);
  s = preset_scenario("clean_10", 0);
  s.l_max = 4;
  EXPECT_THROW(s.validate(), ConfigError);
  s = preset_scenario("clean_10", 0);
  s.deployment = ContextDistribution::uniform(3);
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Scenario, NoveltyBonusOnlyInNaiveMode) {
  auto s = preset_scenario("clean_10", 0, Mode::monoscale);
  s.router.novelty_bonus = 0.5;
  EXPECT_EQ(s.effective_router().novelty_bonus, 0.0);
  s.mode = Mode::naive;
  EXPECT_EQ(s.effective_router().novelty_bonus, 0.5);
}

TEST(Stages, FrozenKeepsJ) {
  const auto reports = run_scenario(preset_scenario("clean_10", 0, Mode::frozen));
  ASSERT_EQ(reports.size(), 8u);
  for (const auto& r : reports) {
    EXPECT_NEAR(r.j_after, reports[0].j_after, 1e-12) << r.k;
    EXPECT_LE(r.bridge_residual, 1e-12);
  }
  for (std::size_t i = 1; i < reports.size(); ++i) EXPECT_EQ(reports[i].chosen_kind, ChosenKind::fallback);
  EXPECT_TRUE(audit_monotonicity(reports).pass);
}

TEST(Stages, MonoscaleIsMonotone) {
  for (const auto* preset : {"clean_10", "malfunctioning_10"}) {
    const auto reports = run_scenario(preset_scenario(preset, 3));
    ASSERT_EQ(reports.size(), 8u);
    for (std::size_t i = 1; i < reports.size(); ++i) {
      EXPECT_GE(reports[i].j_after, reports[i - 1].j_after - 1e-12) << preset << " stage " << i;
      EXPECT_GE(reports[i].margin, -1e-12);
      EXPECT_LE(reports[i].bridge_residual, 1e-12);
      EXPECT_NEAR(reports[i].j_before, reports[i - 1].j_after, 1e-12);
    }
    EXPECT_TRUE(audit_monotonicity(reports).pass);
    EXPECT_GT(reports.back().j_after, reports.front().j_after) << preset;
  }
}

TEST(Stages, NaiveCollapsesOnMalfunctioningPool) {
  auto s = preset_scenario("malfunctioning_10", 0, Mode::naive);
  s.router.novelty_bonus = 0.5;
  const auto reports = run_scenario(s);
  const auto audit = audit_monotonicity(reports);
  EXPECT_FALSE(audit.pass);
  ASSERT_TRUE(audit.stage.has_value());
  EXPECT_LE(audit.margin, -0.02);
  EXPECT_FALSE(audit.estimation_mode);
  for (const auto& r : reports) EXPECT_EQ(r.chosen_kind, ChosenKind::identity);
}

TEST(Stages, PureNoiseAgentIsNotAdopted) {
  // Advertises 0.95 everywhere and never succeeds.
  const auto results = collect(single_onboarding(make_agent("noise", flat(0.95), flat(0.0))));
  ASSERT_EQ(results.size(), 2u);
  const auto& r = results[1].report;
  EXPECT_GE(r.margin, -1e-12);
  const auto& b = results[1].state.bandit;
  const auto& m = results[1].state.memory;
  const auto d = ContextDistribution::uniform(90);
  double mass = 0;
  for (std::size_t x = 0; x < 90; ++x) {
    const auto pi = policy_distribution(RouterConfig{}, b, m, x);
    for (std::size_t y = 0; y < pi.size(); ++y)
      if (b.plans()[y].steps[0] == 3) mass += d[x] * pi[y];
  }
  EXPECT_LT(mass, 0.01);
}

TEST(Stages, DominantAgentImprovesJ) {
  const auto results = collect(single_onboarding(make_agent("oracle", flat(0.5), flat(1.0))));
  const auto& r = results[1].report;
  EXPECT_EQ(r.chosen_kind, ChosenKind::candidate);
  EXPECT_GT(r.margin, 0.0);
  EXPECT_LE(r.kl.nats(), 0.05);
}

TEST(Stages, EmptyBufferKeepsFallback) {
  auto s = single_onboarding(presets::clean_10()[3]);
  s.synth.n_tasks = 0;
  const auto results = collect(s);
  const auto& r = results[1].report;
  EXPECT_EQ(r.buffer_n, 0u);
  EXPECT_EQ(r.warm_tasks, 0u);
  EXPECT_EQ(r.chosen_kind, ChosenKind::fallback);
  EXPECT_NEAR(r.margin, 0.0, 1e-12);
  EXPECT_TRUE(results[1].state.memory.contains(fallback_entry_id("search_expert_agent")));
}

TEST(Stages, EventsAreOrdered) {
  std::vector<Json> events;
  run_scenario(preset_scenario("clean_10", 1), [&](const Json& e) { events.push_back(e); });
  ASSERT_FALSE(events.empty());
  EXPECT_EQ(events.front().at("event"), "stage_start");
  EXPECT_EQ(events.back().at("event"), "stage_end");
  int stage_ends = 0;
  for (const auto& e : events) {
    if (e.at("event") == "stage_end") ++stage_ends;
    if (e.at("event") == "update") {
      EXPECT_EQ(e.at("candidates").at(0).at("id"), "fallback");
      EXPECT_EQ(e.at("candidates").at(0).at("kl"), 0.0);
      EXPECT_EQ(e.at("candidates").at(0).at("feasible"), true);
    }
  }
  EXPECT_EQ(stage_ends, 8);
}

TEST(Stages, DeterministicInSeed) {
  auto dump = [](const Scenario& s) {
    std::string out;
    run_scenario(s, [&](const Json& e) { out += e.dump() + "\n"; });
    return out;
  };
  EXPECT_EQ(dump(preset_scenario("malfunctioning_10", 5)), dump(preset_scenario("malfunctioning_10", 5)));
  EXPECT_NE(dump(preset_scenario("malfunctioning_10", 5)), dump(preset_scenario("malfunctioning_10", 6)));
}

TEST(Stages, ResumeReproducesTail) {
  const auto s = preset_scenario("clean_10", 2);
  const auto full = collect(s);
  const int k = 3;
  const auto tail = run_scenario(s, {}, {}, resume_state(s, k, full[k].state.memory));
  ASSERT_EQ(tail.size(), full.size() - k - 1);
  for (std::size_t i = 0; i < tail.size(); ++i) {
    const auto& a = tail[i];
    const auto& b = full[k + 1 + i].report;
    EXPECT_EQ(a.k, b.k);
    EXPECT_EQ(a.j_after, b.j_after);
    EXPECT_EQ(a.margin, b.margin);
    EXPECT_EQ(a.chosen_kind, b.chosen_kind);
  }
  EXPECT_THROW(resume_state(s, 8, Memory{}), ConfigError);
}

TEST(Audit, Examples) {
  StageReport a, b, c;
  b.k = 1;
  b.margin = -1e-13;
  c.k = 2;
  c.margin = -0.03;
  c.estimation_mode = true;
  EXPECT_TRUE(audit_monotonicity({a, b}).pass);
  const auto r = audit_monotonicity({a, b, c});
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.stage, 2);
  EXPECT_DOUBLE_EQ(r.margin, -0.03);
  EXPECT_TRUE(r.estimation_mode);
  EXPECT_THROW(audit_monotonicity({a}), ConfigError);
}

TEST(Stages, WarmUpdateDistributionIsTaggedEstimation) {
  auto s = preset_scenario("clean_10", 0);
  s.update_distribution = UpdateDistribution::warm;
  const auto warm = run_scenario(s);
  for (std::size_t i = 1; i < warm.size(); ++i) EXPECT_TRUE(warm[i].estimation_mode);
  s.update_distribution = UpdateDistribution::deployment;
  s.trust.evaluation = TrustRegionConfig::Evaluation::empirical;
  const auto empirical = run_scenario(s);
  for (std::size_t i = 1; i < empirical.size(); ++i) EXPECT_TRUE(empirical[i].estimation_mode);
  EXPECT_FALSE(empirical[0].estimation_mode);
}
