#include "mecvr/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>


namespace mecvr {

const char* agent_name(AgentKind kind) {
  switch (kind) {
    case AgentKind::kLstmDdpg: return "lstm-ddpg";
    case AgentKind::kDdpg: return "ddpg";
    case AgentKind::kRandom: return "random";
  }
  return "?";
}

AgentKind parse_agent(const std::string& name) {
  for (AgentKind k : {AgentKind::kLstmDdpg, AgentKind::kDdpg, AgentKind::kRandom})
    if (name == agent_name(k)) return k;
  throw std::invalid_argument("unknown agent '" + name + "' (expected lstm-ddpg, ddpg or random)");
}

void AgentConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("agent." + m); };
  if (!(actor_lr > 0.0)) fail("actor_lr must be > 0");
  if (!(critic_lr > 0.0)) fail("critic_lr must be > 0");
  if (!(discount >= 0.0 && discount < 1.0)) fail("discount must lie in [0, 1)");
  if (!(soft_update > 0.0 && soft_update < 1.0)) fail("soft_update must lie in (0, 1)");
  if (target_interval < 1) fail("target_interval must be >= 1");
  if (!(noise_std >= 0.0)) fail("noise_std must be >= 0");
  if (noise_std > 0.0 && !(noise_final_std > 0.0)) fail("noise_final_std must be > 0 when noise_std > 0");
  if (batch < 1) fail("batch must be >= 1");
  if (replay_capacity < batch) fail("replay_capacity must be >= batch");
  if (episodes < 1) fail("episodes must be >= 1");
  if (slots_per_episode < 1) fail("slots_per_episode must be >= 1");
  for (int w : actor_hidden)
    if (w < 1) fail("actor_hidden widths must be >= 1");
  for (int w : critic_hidden)
    if (w < 1) fail("critic_hidden widths must be >= 1");
  if (!(channel_state_scale > 0.0)) fail("channel_state_scale must be > 0");
  if (!(reward_scale > 0.0)) fail("reward_scale must be > 0");
}

double AgentConfig::noise_at(std::size_t episode) const {
  if (episodes <= 1 || noise_std == 0.0) return noise_std;
  const double frac =
      static_cast<double>(std::min(episode, episodes - 1)) / static_cast<double>(episodes - 1);
  return noise_std * std::pow(noise_final_std / noise_std, frac);
}

ActionLayout action_layout(const EnvironmentConfig& cfg) {
  return {cfg.grid.fov_size(), cfg.local_capacity, cfg.mec_capacity};
}

nn::Vector vectorize_state(const SystemState& s, double channel_scale) {
  const auto N = static_cast<Eigen::Index>(s.local_cache_vec.size());
  const auto K = static_cast<Eigen::Index>(s.predicted_popularity.size());
  nn::Vector v(2 * N + K + 1);
  for (Eigen::Index i = 0; i < N; ++i) {
    v(i) = s.local_cache_vec[static_cast<std::size_t>(i)];
    v(N + i) = s.mec_cache_vec[static_cast<std::size_t>(i)];
  }
  for (Eigen::Index k = 0; k < K; ++k) v(2 * N + k) = s.predicted_popularity[static_cast<std::size_t>(k)];
  v(2 * N + K) = s.channel_gain * channel_scale;
  return v;
}

nn::Vector vectorize_history_state(const SystemState& s, const TileGrid& grid, double channel_scale) {
  const auto N = static_cast<Eigen::Index>(s.local_cache_vec.size());
  const auto T = static_cast<Eigen::Index>(s.request_window.size());
  nn::Vector v = nn::Vector::Zero(2 * N + T * N + 1);
  for (Eigen::Index i = 0; i < N; ++i) {
    v(i) = s.local_cache_vec[static_cast<std::size_t>(i)];
    v(N + i) = s.mec_cache_vec[static_cast<std::size_t>(i)];
  }
  for (Eigen::Index t = 0; t < T; ++t)
    for (TileId tile : grid.fov_tiles(s.request_window[static_cast<std::size_t>(t)]))
      v(2 * N + t * N + tile - 1) = 1.0;
  v(2 * N + T * N) = s.channel_gain * channel_scale;
  return v;
}

int state_dimension(AgentKind kind, const EnvironmentConfig& cfg) {
  const int N = cfg.grid.tile_count();
  if (kind == AgentKind::kDdpg) return 2 * N + static_cast<int>(cfg.window_slots) * N + 1;
  return 2 * N + cfg.grid.viewpoint_count() + 1;
}

namespace {

// Keeps the `keep` highest-scoring set bits; ties go to the lower index.
void keep_top(std::vector<std::uint8_t>& bits, const nn::Vector& raw, int offset, int keep) {
  std::vector<int> on;
  for (int i = 0; i < static_cast<int>(bits.size()); ++i)
    if (bits[static_cast<std::size_t>(i)]) on.push_back(i);
  if (static_cast<int>(on.size()) <= keep) return;
  std::stable_sort(on.begin(), on.end(), [&](int a, int b) { return raw(offset + a) > raw(offset + b); });
  for (std::size_t j = static_cast<std::size_t>(keep); j < on.size(); ++j) bits[static_cast<std::size_t>(on[j])] = 0;
}

int count(const std::vector<std::uint8_t>& bits) {
  return static_cast<int>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

void balance(std::vector<std::uint8_t>& store, int store_off, std::vector<std::uint8_t>& del, int del_off,
             const nn::Vector& raw) {
  const int n = std::min(count(store), count(del));
  keep_top(store, raw, store_off, n);
  keep_top(del, raw, del_off, n);
}

}  // namespace

HybridAction binarize_and_repair(const nn::Vector& raw, const ActionLayout& L, const CacheState& local,
                                 const CacheState& mec, const TileSet& fov, const AblationFlags& flags) {
  if (raw.size() != L.size())
    throw std::invalid_argument("raw action has " + std::to_string(raw.size()) + " entries, expected " +
                                std::to_string(L.size()));
  if (static_cast<int>(fov.size()) != L.fov || local.capacity() != L.local_slots ||
      mec.capacity() != L.mec_slots)
    throw std::invalid_argument("action layout does not match the slot");

  const int th = L.thresholds();
  const double eps_o = raw(th), eps_sl = raw(th + 1), eps_dl = raw(th + 2), eps_sm = raw(th + 3),
               eps_dm = raw(th + 4);
  auto bits = [&](int offset, int n, double eps) {
    std::vector<std::uint8_t> b(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) b[static_cast<std::size_t>(i)] = raw(offset + i) >= eps ? 1 : 0;
    return b;
  };

  HybridAction a;
  a.offload = bits(L.offload(), L.fov, eps_o);
  if (!flags.segmentation) {
    const double mean = raw.segment(L.offload(), L.fov).mean();
    std::fill(a.offload.begin(), a.offload.end(), mean >= eps_o ? 1 : 0);
  }
  a.store_local = bits(L.store_local(), L.fov, eps_sl);
  a.delete_local = bits(L.delete_local(), L.local_slots, eps_dl);
  a.store_mec = bits(L.store_mec(), L.fov, eps_sm);
  a.delete_mec = bits(L.delete_mec(), L.mec_slots, eps_dm);

  for (int z = 0; z < L.fov; ++z) {
    const auto zi = static_cast<std::size_t>(z);
    if (a.offload[zi] || local.contains(fov[zi])) a.store_local[zi] = 0;
    if (!a.offload[zi] || mec.contains(fov[zi])) a.store_mec[zi] = 0;
  }
  balance(a.store_local, L.store_local(), a.delete_local, L.delete_local(), raw);
  balance(a.store_mec, L.store_mec(), a.delete_mec, L.delete_mec(), raw);

  if (!flags.caching_replacement) {
    std::fill(a.store_local.begin(), a.store_local.end(), 0);
    std::fill(a.delete_local.begin(), a.delete_local.end(), 0);
    std::fill(a.store_mec.begin(), a.store_mec.end(), 0);
    std::fill(a.delete_mec.begin(), a.delete_mec.end(), 0);
  }
  return a;
}

HybridAction binarize_and_repair(const nn::Vector& raw, const SlotSnapshot& snap) {
  const ActionLayout layout{static_cast<int>(snap.fov.size()), snap.local.capacity(), snap.mec.capacity()};
  return binarize_and_repair(raw, layout, snap.local, snap.mec, snap.fov, snap.flags);
}

HybridAction random_policy(const SlotSnapshot& snap, Rng& rng) {
  const ActionLayout layout{static_cast<int>(snap.fov.size()), snap.local.capacity(), snap.mec.capacity()};
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  nn::Vector raw(layout.size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw(i) = unif(rng);
  return binarize_and_repair(raw, snap);
}

// ---------------------------------------------------------------- replay

ReplayBuffer::ReplayBuffer(std::size_t capacity, int state_dim, int action_dim)
    : capacity_(capacity) {
  if (capacity < 1) throw std::invalid_argument("replay capacity must be >= 1");
  const auto cap = static_cast<Eigen::Index>(capacity);
  s_.resize(state_dim, cap);
  a_.resize(action_dim, cap);
  r_.resize(1, cap);
  s2_.resize(state_dim, cap);
}

void ReplayBuffer::push(const nn::Vector& s, const nn::Vector& a, double r, const nn::Vector& s2) {
  if (s.size() != s_.rows() || s2.size() != s_.rows() || a.size() != a_.rows())
    throw std::invalid_argument("replay transition has the wrong dimensions");
  const auto i = static_cast<Eigen::Index>(next_);
  s_.col(i) = s;
  a_.col(i) = a;
  r_(0, i) = r;
  s2_.col(i) = s2;
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

std::size_t ReplayBuffer::slot_of(std::size_t age_rank) const {
  if (age_rank >= size_) throw std::out_of_range("replay age rank out of range");
  const std::size_t oldest = size_ < capacity_ ? 0 : next_;
  return (oldest + age_rank) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng& rng) const {
  if (size_ == 0) throw std::logic_error("cannot sample from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

ReplayBatch ReplayBuffer::gather(const std::vector<std::size_t>& indices) const {
  const auto B = static_cast<Eigen::Index>(indices.size());
  ReplayBatch b{nn::Matrix(s_.rows(), B), nn::Matrix(a_.rows(), B), nn::Matrix(1, B), nn::Matrix(s_.rows(), B)};
  for (Eigen::Index j = 0; j < B; ++j) {
    const std::size_t raw_index = indices[static_cast<std::size_t>(j)];
    if (raw_index >= size_) throw std::out_of_range("replay index out of range");
    const auto i = static_cast<Eigen::Index>(raw_index);
    b.states.col(j) = s_.col(i);
    b.actions.col(j) = a_.col(i);
    b.rewards(0, j) = r_(0, i);
    b.next_states.col(j) = s2_.col(i);
  }
  return b;
}

// ---------------------------------------------------------------- DDPG

DdpgAgent::DdpgAgent(int state_dim, ActionLayout layout, AgentConfig cfg, std::uint64_t seed)
    : state_dim_(state_dim), layout_(layout), cfg_(std::move(cfg)),
      actor_opt_(cfg_.actor_lr), critic_opt_(cfg_.critic_lr) {
  cfg_.validate();
  if (state_dim < 1) throw std::invalid_argument("state dimension must be >= 1");
  nn::Rng rng(seed);
  const int A = layout_.size();
  using nn::Activation;
  actor_ = nn::Mlp(state_dim, cfg_.actor_hidden, A, Activation::kRelu, Activation::kSigmoid, rng, "actor");
  critic_ = nn::Mlp(state_dim + A, cfg_.critic_hidden, 1, Activation::kRelu, Activation::kLinear, rng, "critic");
  target_actor_ = nn::Mlp(state_dim, cfg_.actor_hidden, A, Activation::kRelu, Activation::kSigmoid, rng,
                          "target_actor");
  target_critic_ = nn::Mlp(state_dim + A, cfg_.critic_hidden, 1, Activation::kRelu, Activation::kLinear, rng,
                           "target_critic");
  nn::copy_params(std::as_const(actor_).params(), target_actor_.params());
  nn::copy_params(std::as_const(critic_).params(), target_critic_.params());
}

nn::Matrix DdpgAgent::concat(const nn::Matrix& s, const nn::Matrix& a) {
  nn::Matrix x(s.rows() + a.rows(), s.cols());
  x.topRows(s.rows()) = s;
  x.bottomRows(a.rows()) = a;
  return x;
}

nn::Vector DdpgAgent::greedy_action(const nn::Vector& state) const { return actor_.infer(state); }

nn::Vector DdpgAgent::select_action(const nn::Vector& state, bool explore, double sigma, Rng& rng) const {
  nn::Vector a = greedy_action(state);
  if (explore && sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) += noise(rng);
  }
  return a.cwiseMax(0.0).cwiseMin(1.0);
}

double DdpgAgent::q_value(const nn::Vector& state, const nn::Vector& action) const {
  return critic_.infer(concat(state, action))(0, 0);
}

nn::Matrix DdpgAgent::td_targets(const ReplayBatch& batch) const {
  if (batch.states.cols() == 0) throw std::invalid_argument("td_targets: empty batch");
  const nn::Matrix next_a = target_actor_.infer(batch.next_states);
  const nn::Matrix next_q = target_critic_.infer(concat(batch.next_states, next_a));
  return batch.rewards + cfg_.discount * next_q;
}

double DdpgAgent::update_critic(const ReplayBatch& batch, const nn::Matrix& y) {
  const auto params = critic_.params();
  nn::zero_grad(params);
  const nn::Matrix q = critic_.forward(concat(batch.states, batch.actions));
  const nn::Loss loss = nn::mse_loss(q, y);
  critic_.backward(loss.grad);
  critic_opt_.step(params);
  if (!nn::all_finite(nn::as_const(params))) throw std::runtime_error("critic parameters became non-finite");
  return loss.value;
}

double DdpgAgent::update_actor(const ReplayBatch& batch) {
  const auto actor_params = actor_.params();
  nn::zero_grad(actor_params);
  const auto B = static_cast<double>(batch.states.cols());
  const nn::Matrix a = actor_.forward(batch.states);
  critic_.forward(concat(batch.states, a));
  // Ascend mean Q: the loss is -mean(Q).
  const nn::Matrix dq = nn::Matrix::Constant(1, batch.states.cols(), -1.0 / B);
  const nn::Matrix dx = critic_.backward(dq);
  actor_.backward(dx.bottomRows(a.rows()));
  const double norm = nn::grad_norm(nn::as_const(actor_params));
  actor_opt_.step(actor_params);
  nn::zero_grad(critic_.params());
  if (!nn::all_finite(nn::as_const(actor_params))) throw std::runtime_error("actor parameters became non-finite");
  return norm;
}

void DdpgAgent::update_targets() {
  nn::soft_update(std::as_const(actor_).params(), target_actor_.params(), cfg_.soft_update);
  nn::soft_update(std::as_const(critic_).params(), target_critic_.params(), cfg_.soft_update);
}

void DdpgAgent::learn(const ReplayBatch& batch) {
  update_critic(batch, td_targets(batch));
  update_actor(batch);
  ++learn_steps_;
  if (learn_steps_ % cfg_.target_interval == 0) update_targets();
}

nn::ParamList DdpgAgent::all_params() {
  nn::ParamList p;
  for (nn::Mlp* m : {&actor_, &critic_, &target_actor_, &target_critic_})
    for (auto* q : m->params()) p.push_back(q);
  return p;
}

nn::ConstParamList DdpgAgent::all_params() const {
  nn::ConstParamList p;
  for (const nn::Mlp* m : {&actor_, &critic_, &target_actor_, &target_critic_})
    for (const auto* q : m->params()) p.push_back(q);
  return p;
}

}  // namespace mecvr
