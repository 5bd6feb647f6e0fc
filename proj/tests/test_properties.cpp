#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"

using namespace monoscale;
using namespace testing_helpers;

namespace {

constexpr std::uint64_t kTrials = 150;

}  // namespace

TEST(Properties, PolicyIsADistributionWithZeroOnForbidden) {
  for (std::uint64_t seed = 0; seed < kTrials; ++seed) {
    const auto inst = random_instance(seed);
    const auto& b = inst.bandit;
    for (std::size_t x = 0; x < b.contexts().size(); ++x) {
      const auto pi = policy_distribution(inst.router, b, inst.base, x);
      double s = 0;
      for (std::size_t y = 0; y < pi.size(); ++y) {
        ASSERT_GE(pi[y], 0.0);
        const auto adj = apply_memory(inst.base, b.space(), b.pool(), b.contexts()[x], b.plans()[y], 0.0);
        if (!adj) {
          ASSERT_EQ(pi[y], 0.0) << "seed " << seed;
        }
        s += pi[y];
      }
      ASSERT_NEAR(s, 1.0, 1e-12) << "seed " << seed;
    }
  }
}

TEST(Properties, ExactJMatchesOracle) {
  for (std::uint64_t seed = 0; seed < kTrials; ++seed) {
    const auto inst = random_instance(seed);
    ASSERT_NEAR(exact_J(inst.router, inst.bandit, inst.base, inst.dist).j,
                oracle_J(inst.router, inst.bandit, inst.base, inst.dist), 1e-12)
        << "seed " << seed;
  }
}

TEST(Properties, SurrogateEqualsCandidateJ) {
  for (std::uint64_t seed = 0; seed < kTrials; ++seed) {
    const auto inst = random_instance(seed);
    const auto s = surrogate(inst.router, inst.bandit, inst.base, inst.candidate, inst.dist);
    ASSERT_LE(s.residual(), 1e-10) << "seed " << seed;
    ASSERT_NEAR(s.j_candidate, oracle_J(inst.router, inst.bandit, inst.candidate, inst.dist), 1e-10);
  }
}

TEST(Properties, FallbackBridgesExpansion) {
  for (std::uint64_t seed = 0; seed < kTrials; ++seed) {
    const auto inst = random_instance(seed);
    const auto bigger = inst.bandit.expanded(inst.extra);
    const auto fb = fallback_memory(inst.base, inst.extra.id, 1);
    ASSERT_NEAR(exact_J(inst.router, bigger, fb, inst.dist).j, exact_J(inst.router, inst.bandit, inst.base, inst.dist).j,
                1e-12)
        << "seed " << seed;
    const auto n_old = inst.bandit.plans().size();
    for (std::size_t x = 0; x < bigger.contexts().size(); ++x) {
      const auto p = policy_distribution(inst.router, bigger, fb, x);
      const auto q = policy_distribution(inst.router, inst.bandit, inst.base, x);
      for (std::size_t y = 0; y < n_old; ++y) ASSERT_NEAR(p[y], q[y], 1e-15);
      for (std::size_t y = n_old; y < p.size(); ++y) ASSERT_EQ(p[y], 0.0);
    }
  }
}

TEST(Properties, ExpansionKeepsRewardsAndPlanPrefix) {
  for (std::uint64_t seed = 0; seed < kTrials; ++seed) {
    const auto inst = random_instance(seed);
    const auto bigger = inst.bandit.expanded(inst.extra);
    const auto n_old = inst.bandit.plans().size();
    ASSERT_GT(bigger.plans().size(), n_old);
    for (std::size_t y = 0; y < n_old; ++y) ASSERT_EQ(bigger.plans()[y], inst.bandit.plans()[y]);
    for (std::size_t x = 0; x < bigger.contexts().size(); ++x)
      for (std::size_t y = 0; y < n_old; ++y) ASSERT_EQ(bigger.reward(x, y), inst.bandit.reward(x, y));
  }
}

TEST(Properties, KlIsNonnegativeAndZeroOnSelf) {
  for (std::uint64_t seed = 0; seed < kTrials; ++seed) {
    const auto inst = random_instance(seed);
    const auto self = avg_kl(inst.router, inst.bandit, inst.base, inst.base, inst.dist);
    ASSERT_FALSE(self.is_infinite());
    ASSERT_EQ(self.nats(), 0.0);
    const auto d = avg_kl(inst.router, inst.bandit, inst.base, inst.candidate, inst.dist);
    if (!d.is_infinite()) {
      ASSERT_GE(d.nats(), 0.0);
    }
  }
}

TEST(Properties, TrustRegionNeverLosesToItsBaseline) {
  for (std::uint64_t seed = 0; seed < kTrials; ++seed) {
    const auto inst = random_instance(seed);
    const auto bigger = inst.bandit.expanded(inst.extra);
    std::vector<MemoryEntry> rules;
    for (const auto& e : inst.candidate.entries()) {
      auto r = e;
      r.id = "r:" + e.id;
      r.priority = 1;
      rules.push_back(r);
    }
    rules.push_back(entry("open", inst.extra.id, EffectKind::boost, 0.5, 1));
    const auto cands = enumerate_candidates(bigger, inst.base, rules, TrustRegionConfig{}, inst.extra.id, 1);
    ASSERT_EQ(cands[0].id, "fallback");
    for (const auto& c : cands) ASSERT_TRUE(has_full_support(bigger, c.memory));
    const auto out = trust_region_update(inst.router, bigger, inst.base, cands, inst.dist, TrustRegionConfig{});
    const auto& chosen = out.evaluations[out.chosen_index];
    ASSERT_TRUE(chosen.feasible);
    ASSERT_TRUE(chosen.kl.within(0.05));
    ASSERT_GE(chosen.j, out.baseline_j - 1e-12) << "seed " << seed;
    ASSERT_NEAR(out.baseline_j, exact_J(inst.router, inst.bandit, inst.base, inst.dist).j, 1e-12);
  }
}

TEST(Properties, MemoryJsonRoundTrips) {
  for (std::uint64_t seed = 0; seed < kTrials; ++seed) {
    const auto inst = random_instance(seed);
    ASSERT_EQ(parse_memory(dump_memory(inst.candidate)), inst.candidate);
  }
}

TEST(Properties, InstancesAreDeterministic) {
  const auto a = random_instance(42);
  const auto b = random_instance(42);
  EXPECT_EQ(a.base, b.base);
  EXPECT_EQ(a.dist, b.dist);
  EXPECT_EQ(a.bandit.plans(), b.bandit.plans());
  EXPECT_LE(a.bandit.contexts().size(), 90u);
  EXPECT_LE(a.bandit.pool().size() + 1, 6u);
}
