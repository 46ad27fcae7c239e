#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mecvr/environment.hpp"

// Exhaustive one-slot reference. Everything here is recomputed from a
// SlotSnapshot with its own arithmetic; nothing calls into the environment's
// cost path, so the two can be compared against each other.
namespace mecvr::oracle {

class InstanceTooLarge : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Limits {
  int max_fov = 6;
  int max_local = 4;
  int max_mec = 10;
};

void check_limits(const SlotSnapshot& snap, const Limits& limits = {});

/// Visits every action satisfying the capacity, balance and index
/// constraints, the store masks and the ablation flags, each exactly once.
void for_each_feasible(const SlotSnapshot& snap, const std::function<void(const HybridAction&)>& visit,
                       const Limits& limits = {});
std::vector<HybridAction> enumerate_feasible(const SlotSnapshot& snap, const Limits& limits = {});

/// sum over offload vectors of sum_r C(R,r) C(M_L,r) * sum_s C(S,s) C(M_E,s),
/// where R and S are the masked store-candidate counts for that offload vector.
std::uint64_t closed_form_count(const SlotSnapshot& snap);

SlotOutcome recompute_cost(const SlotSnapshot& snap, const HybridAction& action);

struct MyopicChoice {
  HybridAction action;
  double cost = 0.0;
};

/// Minimum one-slot cost over all feasible actions; ties go to the
/// lexicographically smallest bit string.
MyopicChoice best_myopic(const SlotSnapshot& snap, const Limits& limits = {});

}  // namespace mecvr::oracle
