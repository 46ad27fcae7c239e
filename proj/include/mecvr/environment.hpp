#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mecvr/popularity.hpp"
#include "mecvr/tiling.hpp"

namespace mecvr {

double dbm_to_watt(double dbm);

struct ChannelConfig {
  double bandwidth_hz = 20e6;
  double tx_power_w = 1.0;                        // 30 dBm
  double noise_power_w = 3.1622776601683794e-14;  // -105 dBm
  double distance_m = 100.0;
  double pathloss_exponent = 2.0;
  double backhaul_rate_bps = 1e10;

  void validate() const;
  friend bool operator==(const ChannelConfig&, const ChannelConfig&) = default;
};

struct ComputeConfig {
  double mec_freq_hz = 1e10;
  double local_freq_hz = 3e9;
  double cycles_per_bit = 15.0;
  double mec_kappa = 1e-30;    // J / (cycle Hz^2)
  double local_kappa = 1e-30;  // J / (cycle Hz^2)

  void validate() const;
  friend bool operator==(const ComputeConfig&, const ComputeConfig&) = default;
};

/// Weighted-sum cost Y = omega * ls * T_total + (1 - omega) * es * E_total.
struct CostWeights {
  double omega = 0.8;
  double output_ratio = 3.0;  // 3D output bits per 2D input bit
  double latency_scale = 1.0;
  double energy_scale = 1.0;

  void validate() const;
  friend bool operator==(const CostWeights&, const CostWeights&) = default;
};

struct AblationFlags {
  bool caching_replacement = true;
  bool segmentation = true;

  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

/// Configs 1..4: (caching, segmentation) = (T,T), (F,T), (T,F), (F,F).
AblationFlags ablation_config(int config);

/// A cache holding exactly `capacity` distinct tiles.
class CacheState {
public:
  CacheState() = default;
  CacheState(int capacity, TileSet tiles);

  int capacity() const { return capacity_; }
  const TileSet& tiles() const { return tiles_; }
  bool contains(TileId id) const { return mecvr::contains(tiles_, id); }
  /// Binary membership vector of length n_tiles (index i <-> tile i+1).
  std::vector<std::uint8_t> indicator(int n_tiles) const;

  friend bool operator==(const CacheState&, const CacheState&) = default;

private:
  int capacity_ = 0;
  TileSet tiles_;
};

/// Bit groups of one slot's decision. Offload and both store groups are
/// indexed by FoV position (z-th tile of the sorted FoV); delete groups by
/// position in the sorted cache contents.
struct HybridAction {
  std::vector<std::uint8_t> offload;
  std::vector<std::uint8_t> store_local;
  std::vector<std::uint8_t> delete_local;
  std::vector<std::uint8_t> store_mec;
  std::vector<std::uint8_t> delete_mec;

  /// All-zero action (all local, no replacement).
  static HybridAction idle(int Z, int local_slots, int mec_slots);
  /// Concatenated groups as a '0'/'1' string; used for deterministic tie-breaks.
  std::string bit_string() const;
  int offloaded() const;

  friend bool operator==(const HybridAction&, const HybridAction&) = default;
};

struct TransferSizes {
  double d_2d_down = 0.0;
  double d_mec_down = 0.0;
  double d_cloud_down = 0.0;
  double d_3d_down = 0.0;
  double d_mec_back = 0.0;
  double d_local_back = 0.0;
};

struct SlotOutcome {
  TransferSizes sizes;
  double t_mec = 0.0;
  double t_local = 0.0;
  double t_total = 0.0;
  double e_mec = 0.0;
  double e_local = 0.0;
  double e_tx = 0.0;
  double e_total = 0.0;
  double cost = 0.0;
  double reward = 0.0;
};

/// Names and values of every SlotOutcome field, in a fixed order.
std::vector<std::pair<std::string, double>> outcome_fields(const SlotOutcome& o);

struct SystemState {
  std::vector<std::uint8_t> local_cache_vec;
  std::vector<std::uint8_t> mec_cache_vec;
  std::vector<double> predicted_popularity;
  double channel_gain = 0.0;
  /// Request window R(t), oldest first; consumed by the history-fed agent.
  std::vector<int> request_window;
};

/// Everything needed to evaluate one slot without touching an Environment.
struct SlotSnapshot {
  TileSet fov;
  int request = 0;
  CacheState local;
  CacheState mec;
  double channel_gain = 0.0;
  ChannelConfig channel;
  ComputeConfig compute;
  CostWeights weights;
  double tile_bits = 0.0;
  AblationFlags flags;
};

enum class Constraint {
  kLocalCapacity,
  kMecCapacity,
  kLocalBalance,
  kMecBalance,
  kOffloadBinary,
  kLocalStoreIndex,
  kMecStoreIndex,
};

const char* constraint_name(Constraint c);

class FeasibilityError : public std::runtime_error {
public:
  FeasibilityError(Constraint c, const std::string& detail);
  Constraint constraint() const { return constraint_; }

private:
  Constraint constraint_;
};

/// h = g * d^-alpha.
double channel_gain(const ChannelConfig& cfg, double fading);
/// Rayleigh block fading: unit-mean exponential power gain times path loss.
double draw_channel(const ChannelConfig& cfg, Rng& rng);
/// B * log2(1 + P_B h / sigma^2).
double downlink_rate(double h, const ChannelConfig& cfg);

TransferSizes transfer_sizes(const CacheState& local, const CacheState& mec, const TileSet& fov,
                             const std::vector<std::uint8_t>& offload, double tau, double phi);

SlotOutcome slot_cost(const TransferSizes& sizes, double rate, const ComputeConfig& compute,
                      const ChannelConfig& channel, const std::vector<std::uint8_t>& offload,
                      double tau, const CostWeights& weights);

/// Throws FeasibilityError if `action` violates a capacity/balance/index
/// constraint or an ablation restriction. Never modifies the action.
void validate_action(const CacheState& local, const CacheState& mec, const TileSet& fov,
                     const HybridAction& action, const AblationFlags& flags);

/// Deletes flagged cached tiles and inserts flagged newly computed tiles.
std::pair<CacheState, CacheState> apply_caching(const CacheState& local, const CacheState& mec,
                                                const TileSet& fov, const HybridAction& action);

/// Predicted popularity for the state, from the request window (oldest first).
using PopularityHook = std::function<std::vector<double>(const std::vector<int>&)>;

struct EnvironmentConfig {
  TileGrid grid = default_grid();
  std::vector<double> gamma_space{0.7, 1.0, 1.5, 2.5};
  Matrix2D transition;
  std::size_t window_slots = 20;
  ChannelConfig channel;
  ComputeConfig compute;
  CostWeights weights;
  int local_capacity = 3;
  int mec_capacity = 8;
  AblationFlags flags;

  void validate() const;
  double tile_bits() const { return static_cast<double>(grid.tile_bits()); }
};

struct StepResult {
  SlotOutcome outcome;
  SystemState state;
};

/// Single-owner slot engine. The same (seed, action stream) always yields
/// the same trajectory. Requests, channel draws and cache initialisation use
/// independent RNG streams so that, for a fixed seed, request and channel
/// sequences do not depend on cache sizes or actions.
class Environment {
public:
  explicit Environment(EnvironmentConfig cfg, PopularityHook hook = {});

  SystemState reset(std::uint64_t seed);
  StepResult step(const HybridAction& action);

  SlotSnapshot snapshot() const;
  SystemState observe() const;

  const EnvironmentConfig& config() const { return cfg_; }
  bool initialized() const { return initialized_; }
  int current_request() const { return request_; }
  const TileSet& current_fov() const { return fov_; }
  const CacheState& local_cache() const { return local_; }
  const CacheState& mec_cache() const { return mec_; }
  double current_gain() const { return gain_; }
  const RequestRecorder& recorder() const { return recorder_; }
  const MarkovZipfProcess& chain() const { return chain_; }
  std::uint64_t slot() const { return slot_; }

  void set_popularity_hook(PopularityHook hook) { hook_ = std::move(hook); }

private:
  void require_initialized() const;
  void next_request();

  EnvironmentConfig cfg_;
  PopularityHook hook_;
  MarkovZipfProcess chain_;
  std::vector<ZipfPmf> pmfs_;
  RequestRecorder recorder_;
  CacheState local_;
  CacheState mec_;
  TileSet fov_;
  int request_ = 0;
  double gain_ = 0.0;
  std::vector<double> predicted_;
  bool initialized_ = false;
  std::uint64_t slot_ = 0;
  Rng popularity_rng_;
  Rng channel_rng_;
  Rng cache_rng_;
};

/// Derives independent seeds from one base seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace mecvr
