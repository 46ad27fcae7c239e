#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mecvr/environment.hpp"
#include "mecvr/nn.hpp"

namespace mecvr {

enum class AgentKind { kLstmDdpg, kDdpg, kRandom };

const char* agent_name(AgentKind kind);
AgentKind parse_agent(const std::string& name);

struct AgentConfig {
  double actor_lr = 1e-4;
  double critic_lr = 1e-4;
  double discount = 0.85;
  double soft_update = 0.001;
  std::size_t target_interval = 1;
  double noise_std = 0.1;
  /// Exploration std reached at the last episode (exponential decay).
  double noise_final_std = 0.01;
  std::size_t batch = 64;
  std::size_t replay_capacity = 100000;
  std::size_t episodes = 1000;
  std::size_t slots_per_episode = 100;
  std::vector<int> actor_hidden{128, 128, 128};
  std::vector<int> critic_hidden{128, 128, 128};
  /// Multiplies the channel gain in the state vector (h is ~1e-4 at 100 m).
  double channel_state_scale = 1e4;
  /// Multiplies rewards before they enter the replay buffer.
  double reward_scale = 1.0;

  void validate() const;
  double noise_at(std::size_t episode) const;
};

/// Positions of each group inside the raw actor output:
/// [offload Z | store_local Z | delete_local M_L | store_mec Z | delete_mec M_E | 5 thresholds]
struct ActionLayout {
  int fov = 0;
  int local_slots = 0;
  int mec_slots = 0;

  int offload() const { return 0; }
  int store_local() const { return fov; }
  int delete_local() const { return 2 * fov; }
  int store_mec() const { return 2 * fov + local_slots; }
  int delete_mec() const { return 3 * fov + local_slots; }
  int thresholds() const { return 3 * fov + local_slots + mec_slots; }
  int size() const { return thresholds() + 5; }
};

ActionLayout action_layout(const EnvironmentConfig& cfg);

/// [local indicator | MEC indicator | predicted pmf | scaled channel gain]
nn::Vector vectorize_state(const SystemState& s, double channel_scale);
/// Same, with the pmf replaced by the flattened FoV encodings of the window.
nn::Vector vectorize_history_state(const SystemState& s, const TileGrid& grid, double channel_scale);
int state_dimension(AgentKind kind, const EnvironmentConfig& cfg);

/// Thresholds the scores and repairs them into a feasible action. Total:
/// any raw vector of the right length yields an action the environment accepts.
HybridAction binarize_and_repair(const nn::Vector& raw, const ActionLayout& layout,
                                 const CacheState& local, const CacheState& mec, const TileSet& fov,
                                 const AblationFlags& flags);
HybridAction binarize_and_repair(const nn::Vector& raw, const SlotSnapshot& snap);

/// Uniform raw scores and thresholds passed through the repair.
HybridAction random_policy(const SlotSnapshot& snap, Rng& rng);

struct ReplayBatch {
  nn::Matrix states;       // S x B
  nn::Matrix actions;      // A x B
  nn::Matrix rewards;      // 1 x B
  nn::Matrix next_states;  // S x B
};

/// Fixed-capacity FIFO of transitions with uniform sampling (with replacement).
class ReplayBuffer {
public:
  ReplayBuffer(std::size_t capacity, int state_dim, int action_dim);

  void push(const nn::Vector& s, const nn::Vector& a, double r, const nn::Vector& s2);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  /// Storage slot of the i-th oldest transition.
  std::size_t slot_of(std::size_t age_rank) const;

  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;
  ReplayBatch gather(const std::vector<std::size_t>& indices) const;
  ReplayBatch sample(std::size_t batch, Rng& rng) const { return gather(sample_indices(batch, rng)); }

private:
  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t next_ = 0;
  nn::Matrix s_, a_, r_, s2_;
};

/// Actor/critic pair with target copies. The critic takes [state; action].
class DdpgAgent {
public:
  DdpgAgent(int state_dim, ActionLayout layout, AgentConfig cfg, std::uint64_t seed);

  /// Actor output, optionally with clamped Gaussian noise of std `sigma`.
  nn::Vector select_action(const nn::Vector& state, bool explore, double sigma, Rng& rng) const;
  nn::Vector greedy_action(const nn::Vector& state) const;

  /// y = r + discount * Q'(s', pi'(s'))
  nn::Matrix td_targets(const ReplayBatch& batch) const;
  /// One Adam step on the critic; returns the pre-step loss.
  double update_critic(const ReplayBatch& batch, const nn::Matrix& y);
  /// One Adam step ascending mean Q through the critic's action input;
  /// returns the actor gradient norm.
  double update_actor(const ReplayBatch& batch);
  void update_targets();
  /// Critic step, actor step, and a target update every target_interval calls.
  void learn(const ReplayBatch& batch);

  double q_value(const nn::Vector& state, const nn::Vector& action) const;

  nn::Mlp& actor() { return actor_; }
  nn::Mlp& critic() { return critic_; }
  const nn::Mlp& actor() const { return actor_; }
  const nn::Mlp& critic() const { return critic_; }
  const nn::Mlp& target_actor() const { return target_actor_; }
  const nn::Mlp& target_critic() const { return target_critic_; }
  nn::Mlp& target_actor() { return target_actor_; }
  nn::Mlp& target_critic() { return target_critic_; }

  const AgentConfig& config() const { return cfg_; }
  const ActionLayout& layout() const { return layout_; }
  int state_dim() const { return state_dim_; }
  std::size_t learn_steps() const { return learn_steps_; }

  /// Online and target parameters, in a fixed order (for checkpoints).
  nn::ParamList all_params();
  nn::ConstParamList all_params() const;

private:
  static nn::Matrix concat(const nn::Matrix& s, const nn::Matrix& a);

  int state_dim_;
  ActionLayout layout_;
  AgentConfig cfg_;
  nn::Mlp actor_, critic_, target_actor_, target_critic_;
  nn::Adam actor_opt_, critic_opt_;
  std::size_t learn_steps_ = 0;
};

}  // namespace mecvr
