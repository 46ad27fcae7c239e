#include "mecvr/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mecvr::oracle {

namespace {

std::uint64_t choose(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

// Calls fn with every r-subset of {0..n-1}, in lexicographic order.
void for_each_subset(int n, int r, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> idx(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) idx[i] = i;
  while (true) {
    fn(idx);
    int i = r - 1;
    while (i >= 0 && idx[i] == n - r + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < r; ++j) idx[j] = idx[j - 1] + 1;
  }
}

bool cached(const TileSet& tiles, TileId t) { return std::find(tiles.begin(), tiles.end(), t) != tiles.end(); }

std::vector<std::vector<std::uint8_t>> offload_choices(int Z, bool segmentation) {
  std::vector<std::vector<std::uint8_t>> out;
  if (!segmentation) {
    out.emplace_back(static_cast<std::size_t>(Z), 0);
    if (Z > 0) out.emplace_back(static_cast<std::size_t>(Z), 1);
    return out;
  }
  for (std::uint32_t mask = 0; mask < (1u << Z); ++mask) {
    std::vector<std::uint8_t> o(static_cast<std::size_t>(Z));
    for (int z = 0; z < Z; ++z) o[z] = (mask >> z) & 1u;
    out.push_back(std::move(o));
  }
  return out;
}

// Store/delete pairs for one cache: candidates are FoV positions, slots are
// positions in the cache. Each visited pair has |store| == |delete|.
void for_each_replacement(int Z, const std::vector<int>& candidates, int slots, bool enabled,
                          const std::function<void(const std::vector<std::uint8_t>&,
                                                   const std::vector<std::uint8_t>&)>& fn) {
  std::vector<std::uint8_t> store(static_cast<std::size_t>(Z), 0);
  std::vector<std::uint8_t> del(static_cast<std::size_t>(slots), 0);
  if (!enabled) {
    fn(store, del);
    return;
  }
  const int c = static_cast<int>(candidates.size());
  for (int r = 0; r <= std::min(c, slots); ++r) {
    for_each_subset(c, r, [&](const std::vector<int>& pick) {
      std::fill(store.begin(), store.end(), 0);
      for (int i : pick) store[candidates[i]] = 1;
      for_each_subset(slots, r, [&](const std::vector<int>& drop) {
        std::fill(del.begin(), del.end(), 0);
        for (int m : drop) del[m] = 1;
        fn(store, del);
      });
    });
  }
}

}  // namespace

void check_limits(const SlotSnapshot& snap, const Limits& limits) {
  const int Z = static_cast<int>(snap.fov.size());
  if (Z > limits.max_fov || snap.local.capacity() > limits.max_local ||
      snap.mec.capacity() > limits.max_mec)
    throw InstanceTooLarge("oracle enumeration limited to Z <= " + std::to_string(limits.max_fov) +
                           ", M_L <= " + std::to_string(limits.max_local) +
                           ", M_E <= " + std::to_string(limits.max_mec));
}

void for_each_feasible(const SlotSnapshot& snap, const std::function<void(const HybridAction&)>& visit,
                       const Limits& limits) {
  check_limits(snap, limits);
  const int Z = static_cast<int>(snap.fov.size());
  const bool caching = snap.flags.caching_replacement;
  HybridAction a;
  for (const auto& offload : offload_choices(Z, snap.flags.segmentation)) {
    a.offload = offload;
    std::vector<int> local_candidates;
    std::vector<int> mec_candidates;
    for (int z = 0; z < Z; ++z) {
      if (!offload[z] && !cached(snap.local.tiles(), snap.fov[z])) local_candidates.push_back(z);
      if (offload[z] && !cached(snap.mec.tiles(), snap.fov[z])) mec_candidates.push_back(z);
    }
    for_each_replacement(Z, local_candidates, snap.local.capacity(), caching,
                         [&](const auto& store_l, const auto& del_l) {
                           a.store_local = store_l;
                           a.delete_local = del_l;
                           for_each_replacement(Z, mec_candidates, snap.mec.capacity(), caching,
                                                [&](const auto& store_m, const auto& del_m) {
                                                  a.store_mec = store_m;
                                                  a.delete_mec = del_m;
                                                  visit(a);
                                                });
                         });
  }
}

std::vector<HybridAction> enumerate_feasible(const SlotSnapshot& snap, const Limits& limits) {
  std::vector<HybridAction> out;
  for_each_feasible(snap, [&](const HybridAction& a) { out.push_back(a); }, limits);
  return out;
}

std::uint64_t closed_form_count(const SlotSnapshot& snap) {
  const int Z = static_cast<int>(snap.fov.size());
  const int ML = snap.local.capacity();
  const int ME = snap.mec.capacity();
  std::uint64_t total = 0;
  for (const auto& o : offload_choices(Z, snap.flags.segmentation)) {
    int R = 0;
    int S = 0;
    for (int z = 0; z < Z; ++z) {
      if (!o[z] && !cached(snap.local.tiles(), snap.fov[z])) ++R;
      if (o[z] && !cached(snap.mec.tiles(), snap.fov[z])) ++S;
    }
    std::uint64_t local = 0;
    std::uint64_t mec = 0;
    if (snap.flags.caching_replacement) {
      for (int r = 0; r <= R; ++r) local += choose(R, r) * choose(ML, r);
      for (int s = 0; s <= S; ++s) mec += choose(S, s) * choose(ME, s);
    } else {
      local = mec = 1;
    }
    total += local * mec;
  }
  return total;
}

SlotOutcome recompute_cost(const SlotSnapshot& snap, const HybridAction& action) {
  const double tau = snap.tile_bits;
  const double phi = snap.weights.output_ratio;
  const int Z = static_cast<int>(snap.fov.size());

  double n_mec = 0, n_local = 0;
  double mec_hit_down = 0, cloud_down = 0, mec_miss = 0;
  for (int i = 0; i < Z; ++i) {
    const bool o = action.offload.at(static_cast<std::size_t>(i)) == 1;
    const bool cl = cached(snap.local.tiles(), snap.fov[i]);
    const bool cm = cached(snap.mec.tiles(), snap.fov[i]);
    n_mec += o ? 1 : 0;
    n_local += o ? 0 : 1;
    mec_hit_down += (!o && !cl && cm) ? 1 : 0;
    cloud_down += (!o && !cl && !cm) ? 1 : 0;
    mec_miss += (o && !cm) ? 1 : 0;
  }

  SlotOutcome r;
  r.sizes.d_mec_down = tau * mec_hit_down;
  r.sizes.d_cloud_down = tau * cloud_down;
  r.sizes.d_2d_down = tau * (mec_hit_down + cloud_down);
  r.sizes.d_3d_down = tau * phi * n_mec;
  r.sizes.d_mec_back = tau * mec_miss;
  r.sizes.d_local_back = tau * cloud_down;

  const double snr = snap.channel.tx_power_w * snap.channel_gain / snap.channel.noise_power_w;
  const double r_wl = snap.channel.bandwidth_hz * std::log(1.0 + snr) / std::log(2.0);
  const double r_bh = snap.channel.backhaul_rate_bps;
  const double w = snap.compute.cycles_per_bit;
  const double fM = snap.compute.mec_freq_hz;
  const double fL = snap.compute.local_freq_hz;

  const double tcomp_m = w * tau * n_mec / fM;
  const double tcomp_l = w * tau * n_local / fL;
  r.t_mec = r.sizes.d_mec_back / r_bh + r.sizes.d_3d_down / r_wl + tcomp_m;
  const double first_leg = std::max(r.sizes.d_local_back / r_bh, r.sizes.d_mec_down / r_wl);
  r.t_local = first_leg + r.sizes.d_local_back / r_wl + tcomp_l;
  r.t_total = r.t_mec > r.t_local ? r.t_mec : r.t_local;

  r.e_mec = snap.compute.mec_kappa * fM * fM * w * tau * n_mec;
  r.e_local = snap.compute.local_kappa * fL * fL * w * tau * n_local;
  r.e_tx = snap.channel.tx_power_w * (r.sizes.d_2d_down + r.sizes.d_3d_down) / r_wl;
  r.e_total = r.e_mec + r.e_local + r.e_tx;

  const double omega = snap.weights.omega;
  r.cost = omega * snap.weights.latency_scale * r.t_total +
           (1.0 - omega) * snap.weights.energy_scale * r.e_total;
  r.reward = -r.cost;
  return r;
}

MyopicChoice best_myopic(const SlotSnapshot& snap, const Limits& limits) {
  MyopicChoice best;
  std::string best_bits;
  bool have = false;
  for_each_feasible(
      snap,
      [&](const HybridAction& a) {
        const double c = recompute_cost(snap, a).cost;
        if (!have || c < best.cost) {
          best = {a, c};
          best_bits = a.bit_string();
          have = true;
        } else if (c == best.cost) {
          std::string bits = a.bit_string();
          if (bits < best_bits) {
            best = {a, c};
            best_bits = std::move(bits);
          }
        }
      },
      limits);
  return best;
}

}  // namespace mecvr::oracle
