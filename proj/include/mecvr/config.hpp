#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "mecvr/agent.hpp"
#include "mecvr/environment.hpp"
#include "mecvr/predictor.hpp"

namespace mecvr {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct EvaluationConfig {
  std::size_t seeds = 10;
  std::size_t episodes = 10;
};

struct ExperimentConfig {
  EnvironmentConfig env;
  PredictorConfig predictor;
  AgentConfig agent;
  EvaluationConfig evaluation;
  AgentKind agent_kind = AgentKind::kLstmDdpg;
  std::uint64_t seed = 1;
  /// Used to draw the transition matrix when the config does not list one.
  std::uint64_t transition_seed = 1;
  std::string output_dir = "out";

  void validate() const;
};

/// Defaults with the transition matrix drawn from transition_seed.
ExperimentConfig default_experiment();

/// Unknown keys, wrong types and invalid values raise ConfigError naming
/// the offending field. Missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Fully resolved form; config_from_json(config_to_json(c)) reproduces c.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

nlohmann::json snapshot_to_json(const SlotSnapshot& snap);
nlohmann::json action_to_json(const HybridAction& action);

}  // namespace mecvr
