#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mecvr/config.hpp"
#include "mecvr/training.hpp"

namespace mecvr {

inline constexpr const char* kMetricsHeader =
    "episode,total_reward,mean_latency_s,p95_latency_s,total_energy_J,mean_cost";

/// Shortest round-trip decimal form, independent of the C locale.
std::string format_number(double v);
std::string metrics_csv(const std::vector<EpisodeMetrics>& episodes);
/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::string& path, const std::string& contents);

struct WindowSummary {
  std::size_t episodes = 0;
  double total_reward = 0.0;
  double mean_latency_s = 0.0;
  double p95_latency_s = 0.0;
  double total_energy_J = 0.0;
  double mean_cost = 0.0;
};

/// Means over the trailing `fraction` of episodes (at least one).
WindowSummary converged_window(const std::vector<EpisodeMetrics>& episodes, double fraction = 0.2);

struct EvalSummary {
  std::vector<double> seed_mean_reward;  // one entry per evaluation seed
  double mean_reward = 0.0;
  /// Normal-approximation 95% half width over the seed means.
  double ci95 = 0.0;
  WindowSummary overall;
  std::vector<EpisodeMetrics> episodes;
};

EvalSummary summarize_evaluation(const std::vector<std::vector<EpisodeMetrics>>& per_seed);

/// Offline pre-training on a simulated trace with ground-truth labels.
std::shared_ptr<const PopularityPredictor> pretrain_predictor(const ExperimentConfig& cfg,
                                                              PredictorTrainReport* report = nullptr);

struct TrainingRun {
  std::vector<EpisodeMetrics> episodes;
  std::shared_ptr<const PopularityPredictor> predictor;  // lstm-ddpg only
  std::unique_ptr<DdpgAgent> agent;                       // null for random
};

/// Trains the configured agent. A predictor is pre-trained for lstm-ddpg
/// unless one is supplied; random runs its policy for the same episodes.
TrainingRun train(const ExperimentConfig& cfg, std::shared_ptr<const PopularityPredictor> predictor = nullptr,
                  const EpisodeCallback& on_episode = {});

/// Greedy episodes on evaluation seeds disjoint from the training seeds.
EvalSummary evaluate(const ExperimentConfig& cfg, const TrainingRun& run);

/// train() plus config.json, metrics.csv and checkpoints in cfg.output_dir.
TrainingRun run_training(const ExperimentConfig& cfg, const EpisodeCallback& on_episode = {});

/// Rebuilds a trained run from the files run_training wrote.
TrainingRun load_run(const ExperimentConfig& cfg, const std::string& dir);

enum class SweepAxis { kOmega, kCacheMec, kCacheLocal, kAblation };

SweepAxis parse_axis(const std::string& name);
const char* axis_name(SweepAxis axis);
std::vector<double> default_axis_values(SweepAxis axis);
/// Copy of cfg with the axis set to value; throws ConfigError if invalid.
ExperimentConfig apply_axis(const ExperimentConfig& cfg, SweepAxis axis, double value);

struct SweepRow {
  SweepAxis axis = SweepAxis::kOmega;
  double value = 0.0;
  AgentKind agent = AgentKind::kLstmDdpg;
  WindowSummary converged;
  std::optional<EvalSummary> eval;
};

inline constexpr const char* kSweepHeader =
    "axis,value,agent,converged_total_reward,converged_mean_latency_s,converged_p95_latency_s,"
    "converged_total_energy_J,converged_mean_cost,eval_mean_reward,eval_ci95";

std::string sweep_csv(const std::vector<SweepRow>& rows);

struct SweepOptions {
  bool evaluate = true;
  /// Writes per-point results under output_dir/<axis>_<value>/ and sweep.csv.
  bool write_files = true;
};

/// One training (and optionally evaluation) per value. The predictor is
/// pre-trained once and shared, since no axis changes its inputs.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                                const SweepOptions& opts = {},
                                const std::function<void(const SweepRow&)>& on_row = {});

struct OracleMismatch {
  std::size_t trial = 0;
  std::string field;
  double environment = 0.0;
  double oracle = 0.0;
  nlohmann::json snapshot;
  nlohmann::json action;
};

struct OracleReport {
  std::size_t trials = 0;
  std::size_t actions_enumerated = 0;
  std::vector<OracleMismatch> mismatches;
  std::vector<std::string> enumeration_errors;
  bool passed() const { return mismatches.empty() && enumeration_errors.empty(); }
};

/// Applied to the environment's outcome before comparison (negative control).
using OutcomeCorruption = std::function<void(SlotOutcome&)>;

/// For each trial: a seeded snapshot a few slots into an episode, a full
/// enumeration checked against the closed-form count and the validator, and
/// one uniformly drawn feasible action whose environment outcome must match
/// the oracle on every field to 1e-9 relative.
OracleReport check_oracle(const ExperimentConfig& cfg, std::size_t trials, std::uint64_t seed,
                          const OutcomeCorruption& corrupt = {});

}  // namespace mecvr
