#include "mecvr/runner.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <utility>

#include "mecvr/checkpoint.hpp"
#include "mecvr/oracle.hpp"

namespace mecvr {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kAgentInitStream = 101;
constexpr std::uint64_t kTraceStream = 201;
constexpr std::uint64_t kPredictorInitStream = 202;
constexpr std::uint64_t kPredictorTrainStream = 203;
constexpr std::uint64_t kEvalStream = 1000003;

const char* kConfigFile = "config.json";
const char* kMetricsFile = "metrics.csv";
const char* kAgentFile = "agent.ckpt";
const char* kPredictorFile = "predictor.ckpt";

std::uint64_t eval_seed(const ExperimentConfig& cfg, std::size_t j) {
  return derive_seed(derive_seed(cfg.seed, kEvalStream), j);
}

std::unique_ptr<DdpgAgent> make_agent(const ExperimentConfig& cfg) {
  return std::make_unique<DdpgAgent>(state_dimension(cfg.agent_kind, cfg.env), action_layout(cfg.env), cfg.agent,
                                     derive_seed(cfg.seed, kAgentInitStream));
}

PopularityHook hook_for(const TrainingRun& run) {
  return run.predictor ? make_popularity_hook(run.predictor) : PopularityHook{};
}

std::string point_dir(const ExperimentConfig& cfg, SweepAxis axis, double value) {
  return (fs::path(cfg.output_dir) / (std::string(axis_name(axis)) + "_" + format_number(value))).string();
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string metrics_csv(const std::vector<EpisodeMetrics>& episodes) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& m : episodes) {
    out += std::to_string(m.episode);
    for (double v : {m.total_reward, m.mean_latency_s, m.p95_latency_s, m.total_energy_J, m.mean_cost})
      out += "," + format_number(v);
    out += "\n";
  }
  return out;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << contents;
    if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, target);
}

WindowSummary converged_window(const std::vector<EpisodeMetrics>& episodes, double fraction) {
  if (episodes.empty()) throw std::invalid_argument("converged_window: no episodes");
  const auto n = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(episodes.size()))));
  WindowSummary w;
  w.episodes = n;
  for (std::size_t i = episodes.size() - n; i < episodes.size(); ++i) {
    const auto& m = episodes[i];
    w.total_reward += m.total_reward;
    w.mean_latency_s += m.mean_latency_s;
    w.p95_latency_s += m.p95_latency_s;
    w.total_energy_J += m.total_energy_J;
    w.mean_cost += m.mean_cost;
  }
  const auto d = static_cast<double>(n);
  w.total_reward /= d;
  w.mean_latency_s /= d;
  w.p95_latency_s /= d;
  w.total_energy_J /= d;
  w.mean_cost /= d;
  return w;
}

EvalSummary summarize_evaluation(const std::vector<std::vector<EpisodeMetrics>>& per_seed) {
  if (per_seed.empty()) throw std::invalid_argument("summarize_evaluation: no seeds");
  EvalSummary s;
  for (const auto& eps : per_seed) {
    if (eps.empty()) throw std::invalid_argument("summarize_evaluation: seed without episodes");
    double sum = 0.0;
    for (const auto& m : eps) sum += m.total_reward;
    s.seed_mean_reward.push_back(sum / static_cast<double>(eps.size()));
    s.episodes.insert(s.episodes.end(), eps.begin(), eps.end());
  }
  const auto n = static_cast<double>(s.seed_mean_reward.size());
  s.mean_reward = std::accumulate(s.seed_mean_reward.begin(), s.seed_mean_reward.end(), 0.0) / n;
  if (s.seed_mean_reward.size() > 1) {
    double ss = 0.0;
    for (double v : s.seed_mean_reward) ss += (v - s.mean_reward) * (v - s.mean_reward);
    s.ci95 = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  s.overall = converged_window(s.episodes, 1.0);
  return s;
}

std::shared_ptr<const PopularityPredictor> pretrain_predictor(const ExperimentConfig& cfg,
                                                              PredictorTrainReport* report) {
  const int K = cfg.env.grid.viewpoint_count();
  const Trace trace = generate_trace(cfg.env.gamma_space, cfg.env.transition, K, cfg.predictor.trace_length,
                                     derive_seed(cfg.seed, kTraceStream));
  auto model = std::make_shared<PopularityPredictor>(cfg.env.grid, cfg.predictor,
                                                     derive_seed(cfg.seed, kPredictorInitStream));
  auto r = train_predictor(*model, build_dataset(trace, cfg.predictor.window),
                           derive_seed(cfg.seed, kPredictorTrainStream));
  if (report) *report = std::move(r);
  return model;
}

TrainingRun train(const ExperimentConfig& cfg, std::shared_ptr<const PopularityPredictor> predictor,
                  const EpisodeCallback& on_episode) {
  cfg.validate();
  TrainingRun run;
  if (cfg.agent_kind == AgentKind::kRandom) {
    Environment env(cfg.env);
    run.episodes = run_policy(env, make_random_policy(derive_seed(cfg.seed, kAgentInitStream)),
                              cfg.agent.episodes, cfg.agent.slots_per_episode, cfg.seed, on_episode);
    return run;
  }
  if (cfg.agent_kind == AgentKind::kLstmDdpg) run.predictor = predictor ? predictor : pretrain_predictor(cfg);
  Environment env(cfg.env, hook_for(run));
  run.agent = make_agent(cfg);
  run.episodes = train_agent(*run.agent, env,
                             make_state_encoder(cfg.agent_kind, cfg.env, cfg.agent.channel_state_scale), cfg.seed,
                             on_episode);
  return run;
}

EvalSummary evaluate(const ExperimentConfig& cfg, const TrainingRun& run) {
  if (cfg.agent_kind != AgentKind::kRandom && !run.agent)
    throw std::invalid_argument("evaluate: run has no trained agent");
  Environment env(cfg.env, hook_for(run));
  const StateEncoder encode = make_state_encoder(cfg.agent_kind, cfg.env, cfg.agent.channel_state_scale);
  std::vector<std::vector<EpisodeMetrics>> per_seed;
  for (std::size_t j = 0; j < cfg.evaluation.seeds; ++j) {
    const std::uint64_t base = eval_seed(cfg, j);
    const Policy policy = run.agent ? greedy_policy(*run.agent, encode) : make_random_policy(derive_seed(base, 0));
    per_seed.push_back(
        run_policy(env, policy, cfg.evaluation.episodes, cfg.agent.slots_per_episode, base));
  }
  return summarize_evaluation(per_seed);
}

TrainingRun run_training(const ExperimentConfig& cfg, const EpisodeCallback& on_episode) {
  const fs::path dir(cfg.output_dir);
  write_file_atomic((dir / kConfigFile).string(), config_to_json(cfg).dump(2) + "\n");
  TrainingRun run = train(cfg, nullptr, on_episode);
  write_file_atomic((dir / kMetricsFile).string(), metrics_csv(run.episodes));
  if (run.agent) save_checkpoint((dir / kAgentFile).string(), std::as_const(*run.agent).all_params());
  if (run.predictor) save_checkpoint((dir / kPredictorFile).string(), run.predictor->params());
  return run;
}

TrainingRun load_run(const ExperimentConfig& cfg, const std::string& dir) {
  TrainingRun run;
  if (cfg.agent_kind == AgentKind::kRandom) return run;
  if (cfg.agent_kind == AgentKind::kLstmDdpg) {
    auto model = std::make_shared<PopularityPredictor>(cfg.env.grid, cfg.predictor, 0);
    load_checkpoint((fs::path(dir) / kPredictorFile).string(), model->params());
    run.predictor = std::move(model);
  }
  run.agent = make_agent(cfg);
  load_checkpoint((fs::path(dir) / kAgentFile).string(), run.agent->all_params());
  return run;
}

// ---------------------------------------------------------------- sweeps

SweepAxis parse_axis(const std::string& name) {
  for (SweepAxis a : {SweepAxis::kOmega, SweepAxis::kCacheMec, SweepAxis::kCacheLocal, SweepAxis::kAblation})
    if (name == axis_name(a)) return a;
  throw ConfigError("unknown sweep axis '" + name + "' (expected omega, cache_mec, cache_local or ablation)");
}

const char* axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kOmega: return "omega";
    case SweepAxis::kCacheMec: return "cache_mec";
    case SweepAxis::kCacheLocal: return "cache_local";
    case SweepAxis::kAblation: return "ablation";
  }
  return "?";
}

std::vector<double> default_axis_values(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kOmega: return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    case SweepAxis::kCacheMec: return {3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    case SweepAxis::kCacheLocal: return {1, 2, 3, 4, 5, 6, 7};
    case SweepAxis::kAblation: return {1, 2, 3, 4};
  }
  return {};
}

ExperimentConfig apply_axis(const ExperimentConfig& cfg, SweepAxis axis, double value) {
  ExperimentConfig out = cfg;
  auto as_int = [&](const char* what) {
    if (value != std::floor(value)) throw ConfigError(std::string(what) + " values must be integers");
    return static_cast<int>(value);
  };
  try {
    switch (axis) {
      case SweepAxis::kOmega: out.env.weights.omega = value; break;
      case SweepAxis::kCacheMec: out.env.mec_capacity = as_int("cache_mec"); break;
      case SweepAxis::kCacheLocal: out.env.local_capacity = as_int("cache_local"); break;
      case SweepAxis::kAblation: out.env.flags = ablation_config(as_int("ablation")); break;
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(axis_name(axis)) + ": " + e.what());
  }
  out.validate();
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = std::string(kSweepHeader) + "\n";
  for (const auto& r : rows) {
    out += std::string(axis_name(r.axis)) + "," + format_number(r.value) + "," + agent_name(r.agent);
    for (double v : {r.converged.total_reward, r.converged.mean_latency_s, r.converged.p95_latency_s,
                     r.converged.total_energy_J, r.converged.mean_cost})
      out += "," + format_number(v);
    out += r.eval ? "," + format_number(r.eval->mean_reward) + "," + format_number(r.eval->ci95) : ",,";
    out += "\n";
  }
  return out;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                                const SweepOptions& opts, const std::function<void(const SweepRow&)>& on_row) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<ExperimentConfig> points;
  for (double v : values) {
    points.push_back(apply_axis(cfg, axis, v));
    points.back().output_dir = point_dir(cfg, axis, v);
  }
  std::shared_ptr<const PopularityPredictor> predictor;
  if (cfg.agent_kind == AgentKind::kLstmDdpg) predictor = pretrain_predictor(cfg);

  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const ExperimentConfig& p = points[i];
    TrainingRun run = train(p, predictor);
    SweepRow row{axis, values[i], p.agent_kind, converged_window(run.episodes), std::nullopt};
    if (opts.evaluate && p.evaluation.seeds > 0) row.eval = evaluate(p, run);
    if (opts.write_files) {
      write_file_atomic((fs::path(p.output_dir) / kConfigFile).string(), config_to_json(p).dump(2) + "\n");
      write_file_atomic((fs::path(p.output_dir) / kMetricsFile).string(), metrics_csv(run.episodes));
    }
    rows.push_back(std::move(row));
    if (on_row) on_row(rows.back());
  }
  if (opts.write_files) write_file_atomic((fs::path(cfg.output_dir) / "sweep.csv").string(), sweep_csv(rows));
  return rows;
}

// ---------------------------------------------------------------- oracle

OracleReport check_oracle(const ExperimentConfig& cfg, std::size_t trials, std::uint64_t seed,
                          const OutcomeCorruption& corrupt) {
  OracleReport report;
  report.trials = trials;
  Environment env(cfg.env);
  for (std::size_t i = 0; i < trials; ++i) {
    const std::uint64_t trial_seed = derive_seed(seed, i);
    Rng rng(derive_seed(trial_seed, 7));
    env.reset(trial_seed);
    const int warm = std::uniform_int_distribution<int>(0, 5)(rng);
    for (int t = 0; t < warm; ++t) env.step(random_policy(env.snapshot(), rng));

    const SlotSnapshot snap = env.snapshot();
    const auto actions = oracle::enumerate_feasible(snap);
    report.actions_enumerated += actions.size();
    const std::uint64_t expected = oracle::closed_form_count(snap);
    if (actions.size() != expected)
      report.enumeration_errors.push_back("trial " + std::to_string(i) + ": enumerated " +
                                          std::to_string(actions.size()) + " actions, closed form gives " +
                                          std::to_string(expected));
    std::vector<std::string> bits;
    bits.reserve(actions.size());
    for (const auto& a : actions) {
      bits.push_back(a.bit_string());
      try {
        validate_action(snap.local, snap.mec, snap.fov, a, snap.flags);
      } catch (const FeasibilityError& e) {
        report.enumeration_errors.push_back("trial " + std::to_string(i) + ": enumerated action " +
                                            bits.back() + " rejected: " + e.what());
      }
    }
    std::sort(bits.begin(), bits.end());
    if (std::adjacent_find(bits.begin(), bits.end()) != bits.end())
      report.enumeration_errors.push_back("trial " + std::to_string(i) + ": duplicate enumerated actions");
    if (actions.empty()) continue;

    const HybridAction& action =
        actions[std::uniform_int_distribution<std::size_t>(0, actions.size() - 1)(rng)];
    SlotOutcome got = env.step(action).outcome;
    if (corrupt) corrupt(got);
    const SlotOutcome want = oracle::recompute_cost(snap, action);
    const auto g = outcome_fields(got);
    const auto w = outcome_fields(want);
    for (std::size_t f = 0; f < g.size(); ++f) {
      const double a = g[f].second, b = w[f].second;
      const double scale = std::max(std::abs(a), std::abs(b));
      if (!(std::abs(a - b) <= 1e-9 * scale))
        report.mismatches.push_back({i, g[f].first, a, b, snapshot_to_json(snap), action_to_json(action)});
    }
  }
  return report;
}

}  // namespace mecvr
