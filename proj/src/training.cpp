#include "mecvr/training.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

namespace mecvr {

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("percentile rank must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

EpisodeMetrics summarize_episode(std::size_t episode, const std::vector<SlotOutcome>& slots) {
  if (slots.empty()) throw std::invalid_argument("episode with no slots");
  EpisodeMetrics m;
  m.episode = episode;
  std::vector<double> latency;
  latency.reserve(slots.size());
  double cost = 0.0;
  for (const auto& s : slots) {
    m.total_reward += s.reward;
    m.total_energy_J += s.e_total;
    cost += s.cost;
    latency.push_back(s.t_total);
  }
  const auto n = static_cast<double>(slots.size());
  m.mean_latency_s = std::accumulate(latency.begin(), latency.end(), 0.0) / n;
  m.p95_latency_s = percentile(std::move(latency), 0.95);
  m.mean_cost = cost / n;
  return m;
}

EpisodeMetrics run_episode(Environment& env, std::uint64_t seed, std::size_t slots, const Policy& policy,
                           std::size_t episode_index, std::vector<SlotOutcome>* trace) {
  SystemState state = env.reset(seed);
  std::vector<SlotOutcome> outcomes;
  outcomes.reserve(slots);
  for (std::size_t t = 0; t < slots; ++t) {
    StepResult r = env.step(policy(state, env.snapshot()));
    outcomes.push_back(r.outcome);
    state = std::move(r.state);
  }
  if (trace) trace->insert(trace->end(), outcomes.begin(), outcomes.end());
  return summarize_episode(episode_index, outcomes);
}

StateEncoder make_state_encoder(AgentKind kind, const EnvironmentConfig& cfg, double channel_scale) {
  if (kind == AgentKind::kDdpg)
    return [grid = cfg.grid, channel_scale](const SystemState& s) {
      return vectorize_history_state(s, grid, channel_scale);
    };
  return [channel_scale](const SystemState& s) { return vectorize_state(s, channel_scale); };
}

Policy greedy_policy(const DdpgAgent& agent, StateEncoder encode) {
  return [&agent, encode = std::move(encode)](const SystemState& s, const SlotSnapshot& snap) {
    return binarize_and_repair(agent.greedy_action(encode(s)), snap);
  };
}

Policy make_random_policy(std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rng](const SystemState&, const SlotSnapshot& snap) { return random_policy(snap, *rng); };
}

std::vector<EpisodeMetrics> train_agent(DdpgAgent& agent, Environment& env, const StateEncoder& encode,
                                        std::uint64_t seed, const EpisodeCallback& on_episode) {
  const AgentConfig& cfg = agent.config();
  const ActionLayout layout = agent.layout();
  ReplayBuffer replay(cfg.replay_capacity, agent.state_dim(), layout.size());
  Rng rng(derive_seed(seed, 0));

  std::vector<EpisodeMetrics> history;
  history.reserve(cfg.episodes);
  for (std::size_t e = 0; e < cfg.episodes; ++e) {
    const double sigma = cfg.noise_at(e);
    nn::Vector s = encode(env.reset(derive_seed(seed, e + 1)));
    std::vector<SlotOutcome> outcomes;
    outcomes.reserve(cfg.slots_per_episode);
    for (std::size_t t = 0; t < cfg.slots_per_episode; ++t) {
      const nn::Vector raw = agent.select_action(s, true, sigma, rng);
      StepResult r = env.step(binarize_and_repair(raw, env.snapshot()));
      nn::Vector s2 = encode(r.state);
      replay.push(s, raw, cfg.reward_scale * r.outcome.reward, s2);
      outcomes.push_back(r.outcome);
      s = std::move(s2);
      if (replay.size() >= cfg.batch) agent.learn(replay.sample(cfg.batch, rng));
    }
    history.push_back(summarize_episode(e, outcomes));
    if (on_episode) on_episode(history.back());
  }
  return history;
}

std::vector<EpisodeMetrics> run_policy(Environment& env, const Policy& policy, std::size_t episodes,
                                       std::size_t slots, std::uint64_t seed,
                                       const EpisodeCallback& on_episode) {
  std::vector<EpisodeMetrics> out;
  for (std::size_t e = 0; e < episodes; ++e) {
    out.push_back(run_episode(env, derive_seed(seed, e + 1), slots, policy, e));
    if (on_episode) on_episode(out.back());
  }
  return out;
}

}  // namespace mecvr
