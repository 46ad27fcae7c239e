#include "mecvr/environment.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>

namespace mecvr {

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw std::invalid_argument(std::string(name) + " must be finite and > 0");
}

int popcount(const std::vector<std::uint8_t>& bits) {
  return static_cast<int>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

bool all_binary(const std::vector<std::uint8_t>& bits) {
  return std::all_of(bits.begin(), bits.end(), [](std::uint8_t b) { return b <= 1; });
}

}  // namespace

void ChannelConfig::validate() const {
  require_positive(bandwidth_hz, "bandwidth_hz");
  require_positive(tx_power_w, "tx_power_w");
  require_positive(noise_power_w, "noise_power_w");
  require_positive(distance_m, "distance_m");
  require_positive(pathloss_exponent, "pathloss_exponent");
  require_positive(backhaul_rate_bps, "backhaul_rate_bps");
}

void ComputeConfig::validate() const {
  require_positive(mec_freq_hz, "mec_freq_hz");
  require_positive(local_freq_hz, "local_freq_hz");
  require_positive(cycles_per_bit, "cycles_per_bit");
  require_positive(mec_kappa, "mec_kappa");
  require_positive(local_kappa, "local_kappa");
  if (!(local_freq_hz < mec_freq_hz))
    throw std::invalid_argument("local_freq_hz must be below mec_freq_hz");
}

void CostWeights::validate() const {
  if (!(omega >= 0.0 && omega <= 1.0)) throw std::invalid_argument("omega must lie in [0, 1]");
  require_positive(output_ratio, "output_ratio");
  require_positive(latency_scale, "latency_scale");
  require_positive(energy_scale, "energy_scale");
}

AblationFlags ablation_config(int config) {
  switch (config) {
    case 1: return {true, true};
    case 2: return {false, true};
    case 3: return {true, false};
    case 4: return {false, false};
    default: throw std::invalid_argument("ablation config must be 1, 2, 3 or 4");
  }
}

CacheState::CacheState(int capacity, TileSet tiles) : capacity_(capacity), tiles_(std::move(tiles)) {
  if (capacity < 0) throw std::invalid_argument("CacheState: negative capacity");
  std::sort(tiles_.begin(), tiles_.end());
  if (std::adjacent_find(tiles_.begin(), tiles_.end()) != tiles_.end())
    throw std::invalid_argument("CacheState: duplicate tiles");
  if (static_cast<int>(tiles_.size()) != capacity)
    throw std::invalid_argument("CacheState: cache must be exactly full");
}

std::vector<std::uint8_t> CacheState::indicator(int n_tiles) const {
  std::vector<std::uint8_t> v(static_cast<std::size_t>(n_tiles), 0);
  for (TileId t : tiles_) v.at(static_cast<std::size_t>(t - 1)) = 1;
  return v;
}

HybridAction HybridAction::idle(int Z, int local_slots, int mec_slots) {
  HybridAction a;
  a.offload.assign(static_cast<std::size_t>(Z), 0);
  a.store_local.assign(static_cast<std::size_t>(Z), 0);
  a.delete_local.assign(static_cast<std::size_t>(local_slots), 0);
  a.store_mec.assign(static_cast<std::size_t>(Z), 0);
  a.delete_mec.assign(static_cast<std::size_t>(mec_slots), 0);
  return a;
}

std::string HybridAction::bit_string() const {
  std::string s;
  for (const auto* group : {&offload, &store_local, &delete_local, &store_mec, &delete_mec})
    for (std::uint8_t b : *group) s.push_back(b ? '1' : '0');
  return s;
}

int HybridAction::offloaded() const { return popcount(offload); }

std::vector<std::pair<std::string, double>> outcome_fields(const SlotOutcome& o) {
  return {{"d_2d_down", o.sizes.d_2d_down},   {"d_mec_down", o.sizes.d_mec_down},
          {"d_cloud_down", o.sizes.d_cloud_down}, {"d_3d_down", o.sizes.d_3d_down},
          {"d_mec_back", o.sizes.d_mec_back}, {"d_local_back", o.sizes.d_local_back},
          {"t_mec", o.t_mec},                 {"t_local", o.t_local},
          {"t_total", o.t_total},             {"e_mec", o.e_mec},
          {"e_local", o.e_local},             {"e_tx", o.e_tx},
          {"e_total", o.e_total},             {"cost", o.cost},
          {"reward", o.reward}};
}

const char* constraint_name(Constraint c) {
  switch (c) {
    case Constraint::kLocalCapacity: return "local-cache-capacity";
    case Constraint::kMecCapacity: return "mec-cache-capacity";
    case Constraint::kLocalBalance: return "local-store-delete-balance";
    case Constraint::kMecBalance: return "mec-store-delete-balance";
    case Constraint::kOffloadBinary: return "offload-binary";
    case Constraint::kLocalStoreIndex: return "local-replacement-index";
    case Constraint::kMecStoreIndex: return "mec-replacement-index";
  }
  return "unknown";
}

FeasibilityError::FeasibilityError(Constraint c, const std::string& detail)
    : std::runtime_error(std::string("infeasible action [") + constraint_name(c) + "]: " + detail),
      constraint_(c) {}

double channel_gain(const ChannelConfig& cfg, double fading) {
  return fading * std::pow(cfg.distance_m, -cfg.pathloss_exponent);
}

double draw_channel(const ChannelConfig& cfg, Rng& rng) {
  std::exponential_distribution<double> fading(1.0);
  double g = fading(rng);
  // Keep h strictly positive; an exact zero has probability ~2^-53.
  if (g <= 0.0) g = std::numeric_limits<double>::min();
  return channel_gain(cfg, g);
}

double downlink_rate(double h, const ChannelConfig& cfg) {
  return cfg.bandwidth_hz * std::log2(1.0 + cfg.tx_power_w * h / cfg.noise_power_w);
}

TransferSizes transfer_sizes(const CacheState& local, const CacheState& mec, const TileSet& fov,
                             const std::vector<std::uint8_t>& offload, double tau, double phi) {
  if (offload.size() != fov.size())
    throw std::domain_error("transfer_sizes: offload length differs from FoV size");
  TransferSizes s;
  int offloaded = 0;
  for (std::size_t z = 0; z < fov.size(); ++z) {
    const bool in_local = local.contains(fov[z]);
    const bool in_mec = mec.contains(fov[z]);
    if (offload[z]) {
      ++offloaded;
      if (!in_mec) s.d_mec_back += tau;
    } else if (!in_local) {
      (in_mec ? s.d_mec_down : s.d_cloud_down) += tau;
    }
  }
  s.d_2d_down = s.d_mec_down + s.d_cloud_down;
  s.d_3d_down = tau * phi * offloaded;
  s.d_local_back = s.d_cloud_down;
  return s;
}

SlotOutcome slot_cost(const TransferSizes& sizes, double rate, const ComputeConfig& compute,
                      const ChannelConfig& channel, const std::vector<std::uint8_t>& offload,
                      double tau, const CostWeights& weights) {
  const double z_total = static_cast<double>(offload.size());
  const double z_mec = static_cast<double>(popcount(offload));
  const double z_local = z_total - z_mec;
  const double cycles_mec = compute.cycles_per_bit * tau * z_mec;
  const double cycles_local = compute.cycles_per_bit * tau * z_local;

  SlotOutcome o;
  o.sizes = sizes;
  const double t_com_mec = cycles_mec / compute.mec_freq_hz;
  const double t_com_local = cycles_local / compute.local_freq_hz;
  o.e_mec = compute.mec_kappa * compute.mec_freq_hz * compute.mec_freq_hz * cycles_mec;
  o.e_local = compute.local_kappa * compute.local_freq_hz * compute.local_freq_hz * cycles_local;

  const double rbh = channel.backhaul_rate_bps;
  o.t_mec = sizes.d_mec_back / rbh + sizes.d_3d_down / rate + t_com_mec;
  // Cloud fetch and MEC-hit downlink run in parallel; cloud tiles are then
  // forwarded over the downlink before local computation starts.
  o.t_local = std::max(sizes.d_local_back / rbh, sizes.d_mec_down / rate) +
              sizes.d_local_back / rate + t_com_local;
  o.t_total = std::max(o.t_mec, o.t_local);

  const double t_down = (sizes.d_2d_down + sizes.d_3d_down) / rate;
  o.e_tx = channel.tx_power_w * t_down;
  o.e_total = o.e_mec + o.e_local + o.e_tx;

  o.cost = weights.omega * weights.latency_scale * o.t_total +
           (1.0 - weights.omega) * weights.energy_scale * o.e_total;
  o.reward = -o.cost;
  return o;
}

namespace {

void check_group(const std::vector<std::uint8_t>& bits, std::size_t expected, Constraint c,
                 const char* name) {
  if (bits.size() != expected)
    throw FeasibilityError(c, std::string(name) + " has length " + std::to_string(bits.size()) +
                                  ", expected " + std::to_string(expected));
  if (!all_binary(bits)) throw FeasibilityError(c, std::string(name) + " holds a non-binary entry");
}

void check_structure(const CacheState& local, const CacheState& mec, const TileSet& fov,
                     const HybridAction& a) {
  const std::size_t Z = fov.size();
  check_group(a.offload, Z, Constraint::kOffloadBinary, "offload");
  check_group(a.store_local, Z, Constraint::kLocalStoreIndex, "store_local");
  check_group(a.delete_local, local.tiles().size(), Constraint::kLocalStoreIndex, "delete_local");
  check_group(a.store_mec, Z, Constraint::kMecStoreIndex, "store_mec");
  check_group(a.delete_mec, mec.tiles().size(), Constraint::kMecStoreIndex, "delete_mec");

  for (std::size_t z = 0; z < Z; ++z) {
    if (a.store_local[z] && (a.offload[z] || local.contains(fov[z])))
      throw FeasibilityError(Constraint::kLocalStoreIndex,
                             "tile " + std::to_string(fov[z]) +
                                 " is not a locally computed, uncached tile");
    if (a.store_mec[z] && (!a.offload[z] || mec.contains(fov[z])))
      throw FeasibilityError(Constraint::kMecStoreIndex,
                             "tile " + std::to_string(fov[z]) +
                                 " is not an MEC-computed, uncached tile");
  }
  if (popcount(a.store_local) != popcount(a.delete_local))
    throw FeasibilityError(Constraint::kLocalBalance,
                           std::to_string(popcount(a.store_local)) + " stores vs " +
                               std::to_string(popcount(a.delete_local)) + " deletes");
  if (popcount(a.store_mec) != popcount(a.delete_mec))
    throw FeasibilityError(Constraint::kMecBalance,
                           std::to_string(popcount(a.store_mec)) + " stores vs " +
                               std::to_string(popcount(a.delete_mec)) + " deletes");
}

CacheState replace(const CacheState& cache, const TileSet& fov,
                   const std::vector<std::uint8_t>& store, const std::vector<std::uint8_t>& del,
                   Constraint capacity) {
  TileSet next;
  for (std::size_t m = 0; m < cache.tiles().size(); ++m)
    if (!del[m]) next.push_back(cache.tiles()[m]);
  for (std::size_t z = 0; z < fov.size(); ++z)
    if (store[z]) next.push_back(fov[z]);
  std::sort(next.begin(), next.end());
  if (static_cast<int>(next.size()) != cache.capacity() ||
      std::adjacent_find(next.begin(), next.end()) != next.end())
    throw FeasibilityError(capacity, "cache would not be exactly full after replacement");
  return CacheState(cache.capacity(), std::move(next));
}

}  // namespace

void validate_action(const CacheState& local, const CacheState& mec, const TileSet& fov,
                     const HybridAction& action, const AblationFlags& flags) {
  check_structure(local, mec, fov, action);
  if (!flags.segmentation) {
    const int n = popcount(action.offload);
    if (n != 0 && n != static_cast<int>(fov.size()))
      throw FeasibilityError(Constraint::kOffloadBinary,
                             "segmentation disabled: offload must be all-zeros or all-ones");
  }
  if (!flags.caching_replacement) {
    if (popcount(action.store_local) || popcount(action.delete_local))
      throw FeasibilityError(Constraint::kLocalStoreIndex, "caching replacement disabled");
    if (popcount(action.store_mec) || popcount(action.delete_mec))
      throw FeasibilityError(Constraint::kMecStoreIndex, "caching replacement disabled");
  }
}

std::pair<CacheState, CacheState> apply_caching(const CacheState& local, const CacheState& mec,
                                                const TileSet& fov, const HybridAction& action) {
  check_structure(local, mec, fov, action);
  // Store candidates are uncached by construction, so a tile can never be
  // both stored and deleted in the same slot.
  return {replace(local, fov, action.store_local, action.delete_local, Constraint::kLocalCapacity),
          replace(mec, fov, action.store_mec, action.delete_mec, Constraint::kMecCapacity)};
}

void EnvironmentConfig::validate() const {
  channel.validate();
  compute.validate();
  weights.validate();
  const int N = grid.tile_count();
  if (local_capacity < 0 || local_capacity > N)
    throw std::invalid_argument("local_capacity must lie in [0, N]");
  if (mec_capacity < 0 || mec_capacity > N)
    throw std::invalid_argument("mec_capacity must lie in [0, N]");
  if (local_capacity > mec_capacity)
    throw std::invalid_argument("local_capacity must not exceed mec_capacity");
  if (window_slots < 1) throw std::invalid_argument("window_slots must be >= 1");
  // The process constructor checks the chain itself.
  MarkovZipfProcess probe(gamma_space, transition);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {
EnvironmentConfig validated(EnvironmentConfig cfg) {
  cfg.validate();
  return cfg;
}
}  // namespace

Environment::Environment(EnvironmentConfig cfg, PopularityHook hook)
    : cfg_(validated(std::move(cfg))),
      hook_(std::move(hook)),
      chain_(cfg_.gamma_space, cfg_.transition),
      recorder_(cfg_.window_slots) {
  const int K = cfg_.grid.viewpoint_count();
  for (double g : cfg_.gamma_space) pmfs_.push_back(zipf_pmf(g, K));
}

void Environment::require_initialized() const {
  if (!initialized_) throw std::logic_error("Environment used before reset()");
}

void Environment::next_request() {
  request_ = sample_request(pmfs_[chain_.state()], popularity_rng_);
  recorder_.record(request_);
  fov_ = cfg_.grid.fov_tiles(request_);
}

SystemState Environment::reset(std::uint64_t seed) {
  popularity_rng_.seed(derive_seed(seed, 1));
  channel_rng_.seed(derive_seed(seed, 2));
  cache_rng_.seed(derive_seed(seed, 3));
  slot_ = 0;

  std::uniform_int_distribution<std::size_t> pick_state(0, chain_.state_count() - 1);
  chain_.set_state(pick_state(popularity_rng_));
  recorder_.clear();
  for (std::size_t i = 0; i < cfg_.window_slots; ++i) {
    if (i > 0) chain_.advance(popularity_rng_);
    next_request();
  }

  const int N = cfg_.grid.tile_count();
  std::vector<TileId> all(static_cast<std::size_t>(N));
  std::iota(all.begin(), all.end(), 1);
  TileSet local;
  TileSet mec;
  std::sample(all.begin(), all.end(), std::back_inserter(local), cfg_.local_capacity, cache_rng_);
  std::sample(all.begin(), all.end(), std::back_inserter(mec), cfg_.mec_capacity, cache_rng_);
  local_ = CacheState(cfg_.local_capacity, std::move(local));
  mec_ = CacheState(cfg_.mec_capacity, std::move(mec));

  gain_ = draw_channel(cfg_.channel, channel_rng_);
  initialized_ = true;
  predicted_.clear();
  return observe();
}

SystemState Environment::observe() const {
  require_initialized();
  SystemState s;
  const int N = cfg_.grid.tile_count();
  const int K = cfg_.grid.viewpoint_count();
  s.local_cache_vec = local_.indicator(N);
  s.mec_cache_vec = mec_.indicator(N);
  s.request_window = recorder_.window();
  if (hook_) {
    s.predicted_popularity = hook_(s.request_window);
    if (static_cast<int>(s.predicted_popularity.size()) != K)
      throw std::logic_error("popularity hook returned a vector of the wrong length");
    const double total =
        std::accumulate(s.predicted_popularity.begin(), s.predicted_popularity.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-6) throw std::logic_error("popularity hook returned a non-pmf");
  } else {
    s.predicted_popularity.assign(static_cast<std::size_t>(K), 1.0 / K);
  }
  s.channel_gain = gain_;
  return s;
}

SlotSnapshot Environment::snapshot() const {
  require_initialized();
  return SlotSnapshot{fov_,         request_,     local_,       mec_,           gain_,
                      cfg_.channel, cfg_.compute, cfg_.weights, cfg_.tile_bits(), cfg_.flags};
}

StepResult Environment::step(const HybridAction& action) {
  require_initialized();
  validate_action(local_, mec_, fov_, action, cfg_.flags);

  const double tau = cfg_.tile_bits();
  const TransferSizes sizes =
      transfer_sizes(local_, mec_, fov_, action.offload, tau, cfg_.weights.output_ratio);
  const double rate = downlink_rate(gain_, cfg_.channel);
  StepResult result;
  result.outcome = slot_cost(sizes, rate, cfg_.compute, cfg_.channel, action.offload, tau, cfg_.weights);

  auto [local, mec] = apply_caching(local_, mec_, fov_, action);
  local_ = std::move(local);
  mec_ = std::move(mec);

  chain_.advance(popularity_rng_);
  next_request();
  gain_ = draw_channel(cfg_.channel, channel_rng_);
  ++slot_;
  result.state = observe();
  return result;
}

}  // namespace mecvr
