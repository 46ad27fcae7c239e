#include <gtest/gtest.h>

#include <set>

#include "mecvr/agent.hpp"
#include "mecvr/oracle.hpp"
#include "test_support.hpp"

using namespace mecvr;
using test::make_snapshot;

TEST(Enumeration, SingleTileSingleSlot) {
  // Offload 0: store-local candidate {tile}, swap or keep -> 2; MEC has no candidate.
  // Offload 1: symmetric on the MEC side -> 2.
  const auto snap = make_snapshot({5}, {1}, {2});
  const auto actions = oracle::enumerate_feasible(snap);
  EXPECT_EQ(actions.size(), 4u);
  EXPECT_EQ(oracle::closed_form_count(snap), 4u);
}

TEST(Enumeration, SegmentationDisabledRestrictsOffload) {
  const auto snap = make_snapshot({1, 2, 8, 9}, {3, 4, 5}, {6, 7, 10, 11}, ablation_config(3));
  for (const auto& a : oracle::enumerate_feasible(snap)) {
    const int n = a.offloaded();
    EXPECT_TRUE(n == 0 || n == 4);
  }
}

TEST(Enumeration, CachingDisabledHasNoReplacement) {
  const auto snap = make_snapshot({1, 2, 8, 9}, {3, 4, 5}, {6, 7, 10, 11}, ablation_config(2));
  const auto actions = oracle::enumerate_feasible(snap);
  EXPECT_EQ(actions.size(), 16u);
  for (const auto& a : actions) {
    for (auto v : {a.store_local, a.delete_local, a.store_mec, a.delete_mec})
      EXPECT_EQ(std::count(v.begin(), v.end(), 1), 0);
  }
}

TEST(Enumeration, CountMatchesClosedFormAndAllFeasibleOnRandomSnapshots) {
  Environment env(test::default_env());
  Rng rng(3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    env.reset(seed);
    for (int t = 0; t < 3; ++t) env.step(random_policy(env.snapshot(), rng));
    const auto snap = env.snapshot();
    const auto actions = oracle::enumerate_feasible(snap);
    EXPECT_EQ(actions.size(), oracle::closed_form_count(snap));
    std::set<std::string> seen;
    for (const auto& a : actions) {
      EXPECT_NO_THROW(validate_action(snap.local, snap.mec, snap.fov, a, snap.flags));
      EXPECT_TRUE(seen.insert(a.bit_string()).second);
    }
  }
}

TEST(Enumeration, GuardsLargeInstances) {
  const auto snap = make_snapshot({1, 2, 3, 4, 5, 6, 7}, {8}, {9});
  EXPECT_THROW(oracle::enumerate_feasible(snap), oracle::InstanceTooLarge);
}

TEST(RecomputeCost, AgreesWithEnvironmentOnEveryAction) {
  Environment env(test::default_env());
  Rng rng(4);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    env.reset(seed);
    const auto snap = env.snapshot();
    const double rate = downlink_rate(snap.channel_gain, snap.channel);
    for (const auto& a : oracle::enumerate_feasible(snap)) {
      const auto sizes = transfer_sizes(snap.local, snap.mec, snap.fov, a.offload, snap.tile_bits,
                                        snap.weights.output_ratio);
      const auto got = slot_cost(sizes, rate, snap.compute, snap.channel, a.offload, snap.tile_bits, snap.weights);
      const auto want = oracle::recompute_cost(snap, a);
      const auto g = outcome_fields(got), w = outcome_fields(want);
      for (std::size_t f = 0; f < g.size(); ++f)
        ASSERT_NEAR(g[f].second, w[f].second, 1e-9 * std::max(std::abs(g[f].second), std::abs(w[f].second)))
            << g[f].first;
    }
  }
}

TEST(RecomputeCost, FullHitAllLocalAtOmegaOne) {
  auto snap = make_snapshot({1, 2, 8, 9}, {1, 2, 8, 9}, {3, 4, 5, 6});
  snap.weights.omega = 1.0;
  const auto r = oracle::recompute_cost(snap, HybridAction::idle(4, 4, 4));
  EXPECT_NEAR(r.cost, 15 * 1.5e8 * 4 / 3e9, 1e-12);
}

TEST(BestMyopic, PrefersMecWhenEverythingIsCachedAndLatencyOnly) {
  auto snap = make_snapshot({1, 2, 8, 9}, {1, 2, 8, 9}, {1, 2, 8, 9});
  snap.weights.omega = 1.0;
  const auto best = oracle::best_myopic(snap);
  // Brute force over offload vectors with the oracle's own cost.
  double direct = 1e300;
  for (const auto& a : oracle::enumerate_feasible(snap)) direct = std::min(direct, oracle::recompute_cost(snap, a).cost);
  EXPECT_DOUBLE_EQ(best.cost, direct);
  EXPECT_GT(best.action.offloaded(), 0);
}

TEST(BestMyopic, TwoPointCheck) {
  auto snap = make_snapshot({5}, {1}, {2}, ablation_config(2));
  const auto best = oracle::best_myopic(snap);
  HybridAction local = HybridAction::idle(1, 1, 1), remote = local;
  remote.offload = {1};
  const double c0 = oracle::recompute_cost(snap, local).cost;
  const double c1 = oracle::recompute_cost(snap, remote).cost;
  EXPECT_DOUBLE_EQ(best.cost, std::min(c0, c1));
}

TEST(BestMyopic, EnergyOnlyPrefersCheaperDevice) {
  auto snap = make_snapshot({1, 2, 8, 9}, {1, 2, 8, 9}, {1, 2, 8, 9});
  snap.weights.omega = 0.0;
  // eta_M f_M^2 > eta_L f_L^2 and MEC output must still cross the air interface.
  const auto best = oracle::best_myopic(snap);
  EXPECT_EQ(best.action.offloaded(), 0);
}

TEST(BestMyopic, BoundsAnyFeasibleAction) {
  Environment env(test::default_env());
  Rng rng(5);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    env.reset(seed);
    const auto snap = env.snapshot();
    const auto best = oracle::best_myopic(snap);
    for (int i = 0; i < 50; ++i)
      EXPECT_LE(best.cost, oracle::recompute_cost(snap, random_policy(snap, rng)).cost);
  }
}
