#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mecvr/agent.hpp"
#include "mecvr/environment.hpp"

namespace mecvr {

struct EpisodeMetrics {
  std::size_t episode = 0;
  double total_reward = 0.0;
  double mean_latency_s = 0.0;
  double p95_latency_s = 0.0;
  double total_energy_J = 0.0;
  double mean_cost = 0.0;
};

/// Linear interpolation between closest ranks; q in [0, 1].
double percentile(std::vector<double> values, double q);

EpisodeMetrics summarize_episode(std::size_t episode, const std::vector<SlotOutcome>& slots);

/// Maps the observed state and the slot about to be served to an action.
using Policy = std::function<HybridAction(const SystemState&, const SlotSnapshot&)>;
using StateEncoder = std::function<nn::Vector(const SystemState&)>;

/// Resets `env` with `seed`, serves `slots` slots with `policy`; outcomes
/// are appended to `trace` when given.
EpisodeMetrics run_episode(Environment& env, std::uint64_t seed, std::size_t slots, const Policy& policy,
                           std::size_t episode_index, std::vector<SlotOutcome>* trace = nullptr);

StateEncoder make_state_encoder(AgentKind kind, const EnvironmentConfig& cfg, double channel_scale);

Policy greedy_policy(const DdpgAgent& agent, StateEncoder encode);
Policy make_random_policy(std::uint64_t seed);

using EpisodeCallback = std::function<void(const EpisodeMetrics&)>;

/// Online DDPG: each slot selects a noisy action, repairs it, steps the
/// environment, stores the transition and performs one learning step once
/// the buffer holds a batch. Episode e resets the environment with
/// derive_seed(seed, e).
std::vector<EpisodeMetrics> train_agent(DdpgAgent& agent, Environment& env, const StateEncoder& encode,
                                        std::uint64_t seed, const EpisodeCallback& on_episode = {});

/// Runs a policy without learning; episode e uses derive_seed(seed, e).
std::vector<EpisodeMetrics> run_policy(Environment& env, const Policy& policy, std::size_t episodes,
                                       std::size_t slots, std::uint64_t seed,
                                       const EpisodeCallback& on_episode = {});

}  // namespace mecvr
