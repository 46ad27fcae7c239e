#include <gtest/gtest.h>

#include <cmath>
#include <utility>

#include "mecvr/agent.hpp"
#include "test_support.hpp"

using namespace mecvr;
using test::make_snapshot;

namespace {

AgentConfig small_agent() {
  AgentConfig cfg;
  cfg.actor_hidden = {16, 16};
  cfg.critic_hidden = {16, 16};
  cfg.batch = 8;
  return cfg;
}

ReplayBatch random_batch(int S, int A, int B, nn::Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto fill = [&](int r) {
    nn::Matrix m(r, B);
    for (int j = 0; j < B; ++j)
      for (int i = 0; i < r; ++i) m(i, j) = u(rng);
    return m;
  };
  return {fill(S), fill(A), fill(1), fill(S)};
}

nn::Vector from_action(const HybridAction& a) {
  std::vector<double> v;
  for (const auto* g : {&a.offload, &a.store_local, &a.delete_local, &a.store_mec, &a.delete_mec})
    for (auto b : *g) v.push_back(b);
  for (int i = 0; i < 5; ++i) v.push_back(0.5);
  return Eigen::Map<nn::Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

TEST(Layout, DefaultSizes) {
  const auto env = test::default_env();
  const ActionLayout L = action_layout(env);
  EXPECT_EQ(L.size(), 3 * 4 + 3 + 8 + 5);
  EXPECT_EQ(L.delete_mec(), 3 * 4 + 3);
  EXPECT_EQ(state_dimension(AgentKind::kLstmDdpg, env), 2 * 35 + 24 + 1);
  EXPECT_EQ(state_dimension(AgentKind::kDdpg, env), 2 * 35 + 20 * 35 + 1);
  EXPECT_EQ(parse_agent(agent_name(AgentKind::kDdpg)), AgentKind::kDdpg);
  EXPECT_THROW(parse_agent("ppo"), std::invalid_argument);
}

TEST(State, VectorLayouts) {
  SystemState s;
  s.local_cache_vec = {1, 0, 0};
  s.mec_cache_vec = {0, 1, 1};
  s.predicted_popularity = {0.25, 0.75};
  s.channel_gain = 2e-4;
  nn::Vector expected(9);
  expected << 1, 0, 0, 0, 1, 1, 0.25, 0.75, 2.0;
  EXPECT_TRUE(vectorize_state(s, 1e4).isApprox(expected, 1e-15));

  Environment env(test::default_env());
  const SystemState full = env.reset(3);
  const nn::Vector h = vectorize_history_state(full, env.config().grid, 1e4);
  ASSERT_EQ(h.size(), state_dimension(AgentKind::kDdpg, env.config()));
  // Each window slot contributes exactly Z ones.
  EXPECT_DOUBLE_EQ(h.segment(70, 20 * 35).sum(), 20.0 * 4);
  EXPECT_EQ(vectorize_state(full, 1e4).size(), state_dimension(AgentKind::kLstmDdpg, env.config()));
}

TEST(Repair, HandWorkedExample) {
  const auto snap = make_snapshot({2, 3, 9, 10}, {1, 2, 3}, {4, 5, 6, 7, 8, 11, 12, 13});
  const ActionLayout L{4, 3, 8};
  nn::Vector raw(L.size());
  raw << 0.9, 0.1, 0.8, 0.2,              // offload: tiles 2 and 9 go to the MEC
      0.9, 0.9, 0.9, 0.9,                 // store_local: only tile 10 is a candidate
      0.6, 0.9, 0.7,                      // delete_local: three requests, one kept
      0.9, 0.9, 0.9, 0.9,                 // store_mec: tiles 2 and 9 are candidates
      0.9, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1,  // delete_mec: one request
      0.5, 0.5, 0.5, 0.5, 0.5;
  const HybridAction a = binarize_and_repair(raw, snap);
  EXPECT_EQ(a.offload, (std::vector<std::uint8_t>{1, 0, 1, 0}));
  EXPECT_EQ(a.store_local, (std::vector<std::uint8_t>{0, 0, 0, 1}));
  EXPECT_EQ(a.delete_local, (std::vector<std::uint8_t>{0, 1, 0}));
  // Tie between tiles 2 and 9 goes to the lower FoV position.
  EXPECT_EQ(a.store_mec, (std::vector<std::uint8_t>{1, 0, 0, 0}));
  EXPECT_EQ(a.delete_mec, (std::vector<std::uint8_t>{1, 0, 0, 0, 0, 0, 0, 0}));
  EXPECT_NO_THROW(validate_action(snap.local, snap.mec, snap.fov, a, snap.flags));
}

TEST(Repair, SegmentationDisabledUsesMeanScore) {
  const ActionLayout L{4, 1, 1};
  auto snap = make_snapshot({1, 2, 8, 9}, {3}, {4}, ablation_config(3));
  nn::Vector raw = nn::Vector::Zero(L.size());
  raw.head(4) << 0.9, 0.9, 0.1, 0.2;  // mean 0.525
  raw.tail(5).setConstant(0.5);
  EXPECT_EQ(binarize_and_repair(raw, snap).offloaded(), 4);
  raw(0) = 0.7;  // mean 0.475
  EXPECT_EQ(binarize_and_repair(raw, snap).offloaded(), 0);
}

TEST(Repair, CachingDisabledClearsReplacement) {
  const auto snap = make_snapshot({1, 2, 8, 9}, {3}, {4}, ablation_config(2));
  nn::Vector raw = nn::Vector::Ones(ActionLayout{4, 1, 1}.size());
  raw.tail(5).setZero();
  const HybridAction a = binarize_and_repair(raw, snap);
  EXPECT_EQ(a.offloaded(), 4);
  EXPECT_EQ(a.store_mec, (std::vector<std::uint8_t>{0, 0, 0, 0}));
  EXPECT_EQ(a.delete_mec, (std::vector<std::uint8_t>{0}));
}

TEST(Repair, RejectsWrongLength) {
  const auto snap = make_snapshot({1, 2, 8, 9}, {3}, {4});
  EXPECT_THROW(binarize_and_repair(nn::Vector::Zero(5), snap), std::invalid_argument);
}

TEST(Repair, RandomOutputsAlwaysFeasibleAndIdempotent) {
  nn::Rng rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int config = 1; config <= 4; ++config) {
    auto cfg = test::default_env();
    cfg.flags = ablation_config(config);
    Environment env(cfg);
    env.reset(static_cast<std::uint64_t>(config));
    const ActionLayout L = action_layout(cfg);
    for (int i = 0; i < 25'000; ++i) {
      const SlotSnapshot snap = env.snapshot();
      nn::Vector raw(L.size());
      for (Eigen::Index j = 0; j < raw.size(); ++j) raw(j) = u(rng);
      const HybridAction a = binarize_and_repair(raw, snap);
      ASSERT_NO_THROW(validate_action(snap.local, snap.mec, snap.fov, a, snap.flags));
      ASSERT_EQ(binarize_and_repair(from_action(a), snap), a);
      if (i % 50 == 0) env.step(a);
    }
  }
}

TEST(Repair, RandomPolicyIsFeasible) {
  Environment env(test::default_env());
  env.reset(1);
  nn::Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const auto snap = env.snapshot();
    const auto a = random_policy(snap, rng);
    ASSERT_NO_THROW(validate_action(snap.local, snap.mec, snap.fov, a, snap.flags));
    env.step(a);
  }
}

TEST(Noise, ExponentialSchedule) {
  AgentConfig cfg;
  cfg.episodes = 11;
  EXPECT_DOUBLE_EQ(cfg.noise_at(0), 0.1);
  EXPECT_NEAR(cfg.noise_at(10), 0.01, 1e-15);
  EXPECT_NEAR(cfg.noise_at(5), std::sqrt(0.1 * 0.01), 1e-15);
  EXPECT_NEAR(cfg.noise_at(100), 0.01, 1e-15);
}

TEST(Noise, EmpiricalStd) {
  const ActionLayout L{4, 3, 8};
  DdpgAgent agent(10, L, small_agent(), 3);
  const nn::Vector s = nn::Vector::Constant(10, 0.5);
  const nn::Vector mu = agent.greedy_action(s);
  ASSERT_GT(mu.minCoeff(), 0.2);
  ASSERT_LT(mu.maxCoeff(), 0.8);
  nn::Rng rng(4);
  const double sigma = 0.02;
  double sum = 0.0, sq = 0.0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const nn::Vector d = agent.select_action(s, true, sigma, rng) - mu;
    sum += d.sum();
    sq += d.squaredNorm();
  }
  const double m = n * static_cast<double>(L.size());
  EXPECT_NEAR(sum / m, 0.0, 4 * sigma / std::sqrt(m));
  EXPECT_NEAR(std::sqrt(sq / m), sigma, 0.02 * sigma);
  EXPECT_EQ(agent.select_action(s, false, sigma, rng), mu);
}

TEST(Noise, OutputsClampedToUnitInterval) {
  DdpgAgent agent(10, ActionLayout{4, 3, 8}, small_agent(), 3);
  nn::Rng rng(5);
  const nn::Vector a = agent.select_action(nn::Vector::Ones(10), true, 5.0, rng);
  EXPECT_GE(a.minCoeff(), 0.0);
  EXPECT_LE(a.maxCoeff(), 1.0);
}

TEST(Replay, FifoEviction) {
  ReplayBuffer buf(3, 1, 1);
  for (int i = 0; i < 5; ++i) buf.push(nn::Vector::Constant(1, i), nn::Vector::Zero(1), i, nn::Vector::Zero(1));
  EXPECT_EQ(buf.size(), 3u);
  const auto b = buf.gather({buf.slot_of(0), buf.slot_of(1), buf.slot_of(2)});
  EXPECT_EQ(b.rewards(0, 0), 2.0);
  EXPECT_EQ(b.rewards(0, 2), 4.0);
  EXPECT_EQ(b.states(0, 1), 3.0);
  EXPECT_THROW(buf.slot_of(3), std::out_of_range);
  EXPECT_THROW(buf.push(nn::Vector::Zero(2), nn::Vector::Zero(1), 0, nn::Vector::Zero(1)), std::invalid_argument);
}

TEST(Replay, UniformSamplingChiSquare) {
  ReplayBuffer buf(10, 1, 1);
  for (int i = 0; i < 10; ++i) buf.push(nn::Vector::Zero(1), nn::Vector::Zero(1), i, nn::Vector::Zero(1));
  nn::Rng rng(6);
  std::vector<double> counts(10, 0.0);
  const int n = 100'000;
  for (auto i : buf.sample_indices(n, rng)) counts[i] += 1;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - n / 10.0) * (c - n / 10.0) / (n / 10.0);
  EXPECT_LT(chi2, 27.88);  // 9 dof, p = 0.001
}

TEST(Ddpg, TargetsStartAsCopies) {
  DdpgAgent agent(6, ActionLayout{1, 1, 1}, small_agent(), 1);
  const auto a = std::as_const(agent).actor().params();
  const auto ta = agent.target_actor().params();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i]->value, ta[i]->value);
  EXPECT_EQ(std::as_const(agent).all_params().size(), 4u * 6u);
}

TEST(Ddpg, TdTargets) {
  AgentConfig cfg = small_agent();
  cfg.discount = 0.0;
  nn::Rng rng(7);
  const ActionLayout L{1, 1, 1};
  DdpgAgent myopic(5, L, cfg, 2);
  const auto batch = random_batch(5, L.size(), 6, rng);
  EXPECT_EQ(myopic.td_targets(batch), batch.rewards);

  cfg.discount = 0.5;
  DdpgAgent agent(5, L, cfg, 2);
  auto& last = agent.target_critic().layers().back();
  last.weight().value.setZero();
  last.bias().value.setConstant(2.0);
  const nn::Matrix y = agent.td_targets(batch);
  EXPECT_TRUE(y.isApprox((batch.rewards.array() + 1.0).matrix(), 1e-15));
}

TEST(Ddpg, CriticLossDecreasesOnFixedBatch) {
  AgentConfig cfg = small_agent();
  cfg.critic_lr = 1e-3;
  nn::Rng rng(8);
  const ActionLayout L{1, 1, 1};
  DdpgAgent agent(5, L, cfg, 3);
  const auto batch = random_batch(5, L.size(), 32, rng);
  const nn::Matrix y = batch.rewards;
  const double first = agent.update_critic(batch, y);
  double last = first;
  for (int i = 0; i < 300; ++i) last = agent.update_critic(batch, y);
  EXPECT_LT(last, 0.2 * first);
}

TEST(Ddpg, ActorStepFollowsFiniteDifferenceSign) {
  // Adam's first step moves each parameter by -lr * sign(g), so the step
  // direction exposes the sign of the analytic gradient of -mean Q.
  AgentConfig cfg = small_agent();
  cfg.actor_lr = 1e-9;
  nn::Rng rng(9);
  const ActionLayout L{1, 1, 1};
  DdpgAgent agent(5, L, cfg, 4);
  const auto batch = random_batch(5, L.size(), 16, rng);
  auto objective = [&] {
    const nn::Matrix a = std::as_const(agent).actor().infer(batch.states);
    nn::Matrix x(5 + a.rows(), a.cols());
    x << batch.states, a;
    return -agent.critic().infer(x).mean();
  };
  std::vector<nn::Matrix> before, fd;
  for (auto* p : agent.actor().params()) {
    before.push_back(p->value);
    nn::Matrix g(p->value.rows(), p->value.cols());
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double v = p->value(i);
      p->value(i) = v + 1e-6;
      const double up = objective();
      p->value(i) = v - 1e-6;
      const double down = objective();
      p->value(i) = v;
      g(i) = (up - down) / 2e-6;
    }
    fd.push_back(g);
  }
  agent.update_actor(batch);
  const auto params = agent.actor().params();
  int checked = 0;
  for (std::size_t k = 0; k < params.size(); ++k)
    for (Eigen::Index i = 0; i < fd[k].size(); ++i) {
      if (std::abs(fd[k](i)) < 1e-6) continue;
      const double step = params[k]->value(i) - before[k](i);
      EXPECT_EQ(step < 0, fd[k](i) > 0) << params[k]->name << "[" << i << "]";
      ++checked;
    }
  EXPECT_GT(checked, 50);
  EXPECT_EQ(nn::grad_norm(std::as_const(agent).critic().params()), 0.0);
}

TEST(Ddpg, SoftUpdateMovesTargets) {
  AgentConfig cfg = small_agent();
  cfg.soft_update = 0.5;
  nn::Rng rng(10);
  const ActionLayout L{1, 1, 1};
  DdpgAgent agent(5, L, cfg, 5);
  const auto batch = random_batch(5, L.size(), 8, rng);
  agent.learn(batch);
  EXPECT_EQ(agent.learn_steps(), 1u);
  const auto online = std::as_const(agent).critic().params();
  const auto target = agent.target_critic().params();
  double diff = 0.0;
  for (std::size_t i = 0; i < online.size(); ++i) diff += (online[i]->value - target[i]->value).norm();
  EXPECT_GT(diff, 0.0);
  EXPECT_TRUE(nn::all_finite(std::as_const(agent).all_params()));
}
