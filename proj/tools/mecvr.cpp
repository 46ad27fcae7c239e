#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "mecvr/gradcheck.hpp"
#include "mecvr/runner.hpp"

namespace fs = std::filesystem;
using namespace mecvr;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitVerification = 2;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> agent;
  std::optional<int> ablation;
  std::optional<double> omega;
  std::optional<std::size_t> episodes;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Base seed");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--agent", o.agent, "lstm-ddpg, ddpg or random");
  cmd->add_option("--ablation", o.ablation, "Ablation config 1-4")->check(CLI::Range(1, 4));
  cmd->add_option("--omega", o.omega, "Latency weight in [0, 1]");
  cmd->add_option("--episodes", o.episodes, "Training episodes");
}

ExperimentConfig resolve(const CommonOptions& o, const std::string& fallback_config = {}) {
  ExperimentConfig cfg;
  if (!o.config.empty())
    cfg = load_config(o.config);
  else if (!fallback_config.empty() && fs::exists(fallback_config))
    cfg = load_config(fallback_config);
  else
    cfg = default_experiment();
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.output_dir = *o.out;
  if (o.agent) {
    try {
      cfg.agent_kind = parse_agent(*o.agent);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("--agent: ") + e.what());
    }
  }
  if (o.ablation) cfg.env.flags = ablation_config(*o.ablation);
  if (o.omega) cfg.env.weights.omega = *o.omega;
  if (o.episodes) cfg.agent.episodes = *o.episodes;
  cfg.validate();
  return cfg;
}

void print_window(const char* label, const WindowSummary& w) {
  std::printf("%s: reward %.4f  latency %.4f s  p95 %.4f s  energy %.4f J  cost %.4f\n", label, w.total_reward,
              w.mean_latency_s, w.p95_latency_s, w.total_energy_J, w.mean_cost);
}

int cmd_train(const CommonOptions& o) {
  const ExperimentConfig cfg = resolve(o);
  const std::size_t every = std::max<std::size_t>(1, cfg.agent.episodes / 20);
  TrainingRun run = run_training(cfg, [&](const EpisodeMetrics& m) {
    if (m.episode % every == 0 || m.episode + 1 == cfg.agent.episodes)
      std::fprintf(stderr, "episode %zu  reward %.4f  latency %.4f s\n", m.episode, m.total_reward, m.mean_latency_s);
  });
  print_window("converged", converged_window(run.episodes));
  std::printf("wrote %s\n", cfg.output_dir.c_str());
  return 0;
}

int cmd_eval(const CommonOptions& o) {
  const std::string dir = o.out.value_or(default_experiment().output_dir);
  ExperimentConfig cfg = resolve(o, (fs::path(dir) / "config.json").string());
  const TrainingRun run = load_run(cfg, dir);
  const EvalSummary s = evaluate(cfg, run);
  write_file_atomic((fs::path(dir) / "eval.csv").string(), metrics_csv(s.episodes));
  std::printf("eval (%zu seeds x %zu episodes): mean reward %.4f +/- %.4f\n", cfg.evaluation.seeds,
              cfg.evaluation.episodes, s.mean_reward, s.ci95);
  print_window("overall", s.overall);
  return 0;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--values: '" + item + "' is not a number");
    }
  }
  return values;
}

int cmd_sweep(const CommonOptions& o, const std::string& axis_text, const std::string& values_text) {
  const ExperimentConfig cfg = resolve(o);
  const SweepAxis axis = parse_axis(axis_text);
  const auto values = values_text.empty() ? default_axis_values(axis) : parse_values(values_text);
  run_sweep(cfg, axis, values, {}, [](const SweepRow& r) {
    std::printf("%s=%g  converged reward %.4f  latency %.4f s  energy %.4f J\n", axis_name(r.axis), r.value,
                r.converged.total_reward, r.converged.mean_latency_s, r.converged.total_energy_J);
  });
  std::printf("wrote %s/sweep.csv\n", cfg.output_dir.c_str());
  return 0;
}

int cmd_check_oracle(const CommonOptions& o, std::size_t trials) {
  const ExperimentConfig cfg = resolve(o);
  if (trials == 0) {
    std::fprintf(stderr, "warning: 0 trials requested; nothing checked\n");
    return 0;
  }
  const OracleReport r = check_oracle(cfg, trials, cfg.seed);
  std::printf("%zu trials, %zu enumerated actions, %zu field mismatches, %zu enumeration errors\n", r.trials,
              r.actions_enumerated, r.mismatches.size(), r.enumeration_errors.size());
  for (const auto& e : r.enumeration_errors) std::printf("  %s\n", e.c_str());
  if (!r.mismatches.empty()) {
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& m : r.mismatches) {
      std::printf("  trial %zu field %s: environment %.17g oracle %.17g\n", m.trial, m.field.c_str(), m.environment,
                  m.oracle);
      failures.push_back({{"trial", m.trial},
                          {"field", m.field},
                          {"environment", m.environment},
                          {"oracle", m.oracle},
                          {"snapshot", m.snapshot},
                          {"action", m.action}});
    }
    const auto path = (fs::path(cfg.output_dir) / "oracle_failures.json").string();
    write_file_atomic(path, failures.dump(2) + "\n");
    std::printf("failing snapshots written to %s\n", path.c_str());
  }
  return r.passed() ? 0 : kExitVerification;
}

int cmd_check_grad(std::uint64_t seed, std::size_t seeds) {
  bool ok = true;
  for (std::size_t i = 0; i < seeds; ++i) {
    for (const auto& e : nn::run_gradient_suite(seed + i)) {
      std::printf("seed %llu  %-22s %5zu values  max rel err %.3e  %s\n",
                  static_cast<unsigned long long>(seed + i), e.name.c_str(), e.report.checked,
                  e.report.max_rel_error, e.report.passed() ? "ok" : "FAIL");
      ok = ok && e.report.passed();
    }
  }
  return ok ? 0 : kExitVerification;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offloading and caching for tiled 360-degree video with LSTM-DDPG"};
  app.require_subcommand(1);

  CommonOptions train_opts, eval_opts, sweep_opts, oracle_opts;
  auto* train = app.add_subcommand("train", "Pre-train the predictor and train an agent");
  add_common(train, train_opts);
  auto* eval = app.add_subcommand("eval", "Evaluate a trained run greedily");
  add_common(eval, eval_opts);
  auto* sweep = app.add_subcommand("sweep", "Train one agent per axis value");
  add_common(sweep, sweep_opts);
  std::string axis = "omega", values;
  sweep->add_option("--axis", axis, "omega, cache_mec, cache_local or ablation");
  sweep->add_option("--values", values, "Comma-separated axis values (default: the standard range)");
  auto* oracle = app.add_subcommand("check-oracle", "Differential and enumeration checks against the oracle");
  add_common(oracle, oracle_opts);
  std::size_t trials = 1000;
  oracle->add_option("--trials", trials, "Number of random snapshots");
  auto* grad = app.add_subcommand("check-grad", "Finite-difference gradient suite");
  std::uint64_t grad_seed = 1;
  std::size_t grad_seeds = 1;
  grad->add_option("--seed", grad_seed, "First seed");
  grad->add_option("--seeds", grad_seeds, "Number of consecutive seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train) return cmd_train(train_opts);
    if (*eval) return cmd_eval(eval_opts);
    if (*sweep) return cmd_sweep(sweep_opts, axis, values);
    if (*oracle) return cmd_check_oracle(oracle_opts, trials);
    if (*grad) return cmd_check_grad(grad_seed, grad_seeds);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
