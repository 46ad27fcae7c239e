// Acceptance suite: one PASS/FAIL line per criterion.
//
//   mecvr_acceptance [--only 1,4,6] [--sweep-episodes N] [--sweep-width W] [--report FILE]

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mecvr/agent.hpp"
#include "mecvr/gradcheck.hpp"
#include "mecvr/oracle.hpp"
#include "mecvr/predictor.hpp"
#include "mecvr/runner.hpp"
#include "mecvr/training.hpp"

using namespace mecvr;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Budget {
  std::size_t sweep_episodes = 300;
  int sweep_width = 128;
  std::size_t full_episodes = 1000;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// --------------------------------------------------------------------- 1

Verdict oracle_equivalence() {
  const OracleReport r = check_oracle(default_experiment(), 1000, 20240601);
  std::string detail = fmt("%zu trials, %zu actions enumerated, %zu field mismatches, %zu enumeration errors",
                           r.trials, r.actions_enumerated, r.mismatches.size(), r.enumeration_errors.size());
  if (!r.mismatches.empty())
    detail += fmt("; first: trial %zu field %s", r.mismatches.front().trial, r.mismatches.front().field.c_str());
  return {r.passed(), detail};
}

// --------------------------------------------------------------------- 2

bool cache_ok(const CacheState& c, int capacity, int N) {
  const auto& t = c.tiles();
  if (static_cast<int>(t.size()) != capacity) return false;
  if (!std::is_sorted(t.begin(), t.end()) || std::adjacent_find(t.begin(), t.end()) != t.end()) return false;
  return t.empty() || (t.front() >= 1 && t.back() <= N);
}

Verdict feasibility_soak() {
  std::size_t violations = 0, slots = 0;
  std::string first;
  for (int config = 1; config <= 4; ++config) {
    ExperimentConfig cfg = default_experiment();
    cfg.env.flags = ablation_config(config);
    Environment env(cfg.env);
    Rng rng(derive_seed(77, static_cast<std::uint64_t>(config)));
    const int N = cfg.env.grid.tile_count();
    for (std::size_t t = 0; t < 100'000; ++t) {
      if (t % 100 == 0) env.reset(derive_seed(config, t / 100));
      const SlotSnapshot snap = env.snapshot();
      const HybridAction a = random_policy(snap, rng);
      bool ok = true;
      try {
        validate_action(snap.local, snap.mec, snap.fov, a, snap.flags);
        env.step(a);
      } catch (const FeasibilityError& e) {
        ok = false;
        if (first.empty()) first = fmt("config %d slot %zu: %s", config, t, e.what());
      }
      ok = ok && cache_ok(env.local_cache(), cfg.env.local_capacity, N) &&
           cache_ok(env.mec_cache(), cfg.env.mec_capacity, N);
      if (!cfg.env.flags.caching_replacement)
        ok = ok && env.local_cache() == snap.local && env.mec_cache() == snap.mec;
      if (!ok) ++violations;
      ++slots;
    }
  }
  return {violations == 0, fmt("%zu slots over configs 1-4, %zu violations", slots, violations) +
                               (first.empty() ? "" : "; " + first)};
}

// --------------------------------------------------------------------- 3

std::vector<double> stationary(const Matrix2D& P) {
  std::vector<double> pi(P.size(), 1.0 / static_cast<double>(P.size()));
  for (int it = 0; it < 10'000; ++it) {
    std::vector<double> next(P.size(), 0.0);
    for (std::size_t i = 0; i < P.size(); ++i)
      for (std::size_t j = 0; j < P.size(); ++j) next[j] += pi[i] * P[i][j];
    pi = next;
  }
  return pi;
}

Verdict zipf_statistics() {
  const ExperimentConfig cfg = default_experiment();
  const int K = cfg.env.grid.viewpoint_count();
  double worst_norm = 0.0;
  int out_of_band = 0, cells = 0;
  for (double g : cfg.env.gamma_space) {
    // Independent normalisation: direct power-law sum.
    double z = 0.0;
    for (int k = 1; k <= K; ++k) z += std::pow(k, -g);
    const ZipfPmf pmf = zipf_pmf(g, K);
    double sum = 0.0;
    for (int k = 1; k <= K; ++k) {
      sum += pmf.probabilities[k - 1];
      worst_norm = std::max(worst_norm, std::abs(pmf.probabilities[k - 1] - std::pow(k, -g) / z));
    }
    worst_norm = std::max(worst_norm, std::abs(sum - 1.0));

    const int n = 1'000'000;
    Rng rng(derive_seed(3, static_cast<std::uint64_t>(g * 10)));
    std::vector<double> counts(K, 0.0);
    for (int i = 0; i < n; ++i) counts[sample_request(pmf, rng) - 1] += 1;
    for (int k = 0; k < K; ++k) {
      const double p = pmf.probabilities[k];
      ++cells;
      if (std::abs(counts[k] - n * p) > 3.0 * std::sqrt(n * p * (1 - p))) ++out_of_band;
    }
  }

  Rng rng(11);
  const Matrix2D P = random_transition_matrix(cfg.env.gamma_space.size(), rng);
  MarkovZipfProcess chain(cfg.env.gamma_space, P);
  std::vector<double> occupancy(P.size(), 0.0);
  const int steps = 1'000'000;
  for (int t = 0; t < steps; ++t) {
    chain.advance(rng);
    occupancy[chain.state()] += 1.0 / steps;
  }
  const auto pi = stationary(P);
  double worst_rel = 0.0;
  for (std::size_t s = 0; s < P.size(); ++s) worst_rel = std::max(worst_rel, std::abs(occupancy[s] - pi[s]) / pi[s]);

  const bool pass = worst_norm <= 1e-12 && out_of_band == 0 && worst_rel <= 0.01;
  return {pass, fmt("normalisation error %.2e, %d/%d cells outside 3 sigma, chain occupancy max rel error %.4f",
                    worst_norm, out_of_band, cells, worst_rel)};
}

// --------------------------------------------------------------------- 4

Verdict gradient_suite() {
  std::size_t checked = 0, failures = 0;
  double worst = 0.0;
  std::string first;
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
    for (const auto& e : nn::run_gradient_suite(seed)) {
      checked += e.report.checked;
      failures += e.report.failures.size();
      worst = std::max(worst, e.report.max_rel_error);
      if (!e.report.passed() && first.empty()) first = fmt("seed %llu %s", (unsigned long long)seed, e.name.c_str());
    }
  return {failures == 0, fmt("%zu gradients over 5 seeds, max rel error %.2e, %zu failures", checked, worst, failures) +
                             (first.empty() ? "" : "; first: " + first)};
}

// --------------------------------------------------------------------- 5

Verdict predictor_skill() {
  const ExperimentConfig base = default_experiment();
  const TileGrid grid = base.env.grid;
  const int K = grid.viewpoint_count();
  const std::size_t W = base.predictor.window;

  auto score = [&](const std::vector<double>& gammas, const Matrix2D& P, std::uint64_t seed) {
    const auto train = build_dataset(generate_trace(gammas, P, K, base.predictor.trace_length, derive_seed(seed, 1)), W);
    const auto test = build_dataset(generate_trace(gammas, P, K, 2000, derive_seed(seed, 2)), W);
    PopularityPredictor model(grid, base.predictor, derive_seed(seed, 3));
    train_predictor(model, train, derive_seed(seed, 4));
    double uniform = 0.0, empirical = 0.0;
    const std::vector<double> flat(K, 1.0 / K);
    for (const auto& s : test) {
      uniform += pmf_mse(flat, s.label);
      empirical += pmf_mse(empirical_frequencies(s.window, K), s.label);
    }
    const auto n = static_cast<double>(test.size());
    return std::array<double, 3>{model.evaluate(test), uniform / n, empirical / n};
  };

  const auto fixed = score({1.0}, Matrix2D{{1.0}}, 5);
  Rng rng(base.transition_seed);
  const auto markov = score(base.env.gamma_space, random_transition_matrix(base.env.gamma_space.size(), rng), 6);
  const bool pass = fixed[0] <= 0.25 * fixed[1] && markov[0] < markov[2];
  return {pass, fmt("fixed gamma: mse %.3g vs uniform %.3g (ratio %.3f); markov: mse %.3g vs empirical %.3g",
                    fixed[0], fixed[1], fixed[0] / fixed[1], markov[0], markov[2])};
}

// --------------------------------------------------------------------- 6, 10

struct FullRun {
  ExperimentConfig cfg;
  TrainingRun run;
};

const FullRun& full_run(const Budget& budget) {
  static const FullRun result = [&] {
    FullRun r{default_experiment(), {}};
    r.cfg.agent.episodes = budget.full_episodes;
    r.run = train(r.cfg);
    return r;
  }();
  return result;
}

Verdict learning_signal(const Budget& budget) {
  const FullRun& full = full_run(budget);
  const EvalSummary agent = evaluate(full.cfg, full.run);
  ExperimentConfig rcfg = full.cfg;
  rcfg.agent_kind = AgentKind::kRandom;
  const EvalSummary random = evaluate(rcfg, TrainingRun{});
  const bool pass = agent.mean_reward - agent.ci95 > random.mean_reward + random.ci95;
  const WindowSummary conv = converged_window(full.run.episodes);
  return {pass, fmt("%zu episodes; eval reward %.2f +/- %.2f vs random %.2f +/- %.2f; converged latency %.3f s, "
                    "energy %.2f J",
                    full.cfg.agent.episodes, agent.mean_reward, agent.ci95, random.mean_reward, random.ci95,
                    conv.mean_latency_s, conv.total_energy_J)};
}

Verdict myopic_bound(const Budget& budget) {
  const FullRun& full = full_run(budget);
  Environment env(full.cfg.env, make_popularity_hook(full.run.predictor));
  const StateEncoder encode = make_state_encoder(full.cfg.agent_kind, full.cfg.env, full.cfg.agent.channel_state_scale);
  const Policy greedy = greedy_policy(*full.run.agent, encode);
  std::size_t slots = 0, below = 0;
  double worst_gap = 0.0;
  const Policy checked = [&](const SystemState& s, const SlotSnapshot& snap) {
    const HybridAction a = greedy(s, snap);
    const double agent_cost = oracle::recompute_cost(snap, a).cost;
    const double bound = oracle::best_myopic(snap).cost;
    ++slots;
    if (bound <= agent_cost * (1.0 + 1e-12)) ++below;
    else worst_gap = std::max(worst_gap, (bound - agent_cost) / agent_cost);
    return a;
  };
  run_policy(env, checked, 10, 100, derive_seed(full.cfg.seed, 10));
  const double frac = static_cast<double>(below) / static_cast<double>(slots);
  return {frac >= 0.99, fmt("%zu/%zu slots with myopic cost <= agent cost (%.2f%%), worst violation %.2e", below,
                            slots, 100.0 * frac, worst_gap)};
}

// --------------------------------------------------------------------- 7-9

ExperimentConfig sweep_base(const Budget& budget, std::uint64_t seed) {
  ExperimentConfig cfg = default_experiment();
  cfg.seed = seed;
  cfg.agent.episodes = budget.sweep_episodes;
  cfg.agent.actor_hidden.assign(3, budget.sweep_width);
  cfg.agent.critic_hidden.assign(3, budget.sweep_width);
  return cfg;
}

std::vector<SweepRow> sweep(const Budget& budget, std::uint64_t seed, SweepAxis axis, const std::vector<double>& values) {
  const auto rows = run_sweep(sweep_base(budget, seed), axis, values, SweepOptions{false, false});
  for (const auto& r : rows)
    std::cout << "    " << axis_name(axis) << "=" << format_number(r.value) << " seed " << seed
              << ": converged reward " << r.converged.total_reward << ", latency " << r.converged.mean_latency_s
              << " s, energy " << r.converged.total_energy_J << " J\n"
              << std::flush;
  return rows;
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return r;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) { return pearson(ranks(x), ranks(y)); }

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

Verdict ablation_ordering(const Budget& budget) {
  std::map<int, std::vector<double>> reward;  // config -> per seed
  for (std::uint64_t seed : {1, 2, 3})
    for (const auto& r : sweep(budget, seed, SweepAxis::kAblation, {1, 2, 3, 4}))
      reward[static_cast<int>(r.value)].push_back(r.converged.total_reward);
  bool pass = true;
  std::string detail;
  for (int c = 1; c <= 3; ++c) {
    int confirmed = 0;
    for (std::size_t s = 0; s < 3; ++s) confirmed += reward[c][s] >= reward[c + 1][s];
    pass = pass && confirmed >= 2;
    detail += fmt("%sC%d>=C%d at %d/3 seeds", c == 1 ? "" : ", ", c, c + 1, confirmed);
  }
  for (int c = 1; c <= 4; ++c)
    detail += fmt("; C%d mean %.2f", c, std::accumulate(reward[c].begin(), reward[c].end(), 0.0) / 3.0);
  return {pass, detail};
}

Verdict tradeoff_trends(const Budget& budget) {
  const std::vector<double> omegas = default_axis_values(SweepAxis::kOmega);
  std::vector<double> latency, energy;
  for (const auto& r : sweep(budget, 1, SweepAxis::kOmega, omegas)) {
    latency.push_back(r.converged.mean_latency_s);
    energy.push_back(r.converged.total_energy_J);
  }
  const double rl = spearman(omegas, latency), re = spearman(omegas, energy);
  return {rl <= -0.6 && re >= 0.6, fmt("spearman(omega, latency) = %.3f, spearman(omega, energy) = %.3f", rl, re)};
}

Verdict capacity_trends(const Budget& budget) {
  auto trend = [&](SweepAxis axis) {
    const auto values = default_axis_values(axis);
    std::vector<double> reward;
    for (const auto& r : sweep(budget, 1, axis, values)) reward.push_back(r.converged.total_reward);
    return slope(values, reward);
  };
  const double mec = trend(SweepAxis::kCacheMec);
  const double local = trend(SweepAxis::kCacheLocal);
  return {mec > 0.0 && local > 0.0,
          fmt("reward slope per MEC slot %.3f (M_L=3), per local slot %.3f (M_E=8)", mec, local)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mecvr acceptance suite"};
  std::vector<int> only;
  Budget budget;
  std::string report_path;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 10));
  app.add_option("--sweep-episodes", budget.sweep_episodes, "Training episodes per sweep point");
  app.add_option("--sweep-width", budget.sweep_width, "Hidden width of sweep agents");
  app.add_option("--full-episodes", budget.full_episodes, "Training episodes for the full-size agent");
  app.add_option("--report", report_path, "Also write the PASS/FAIL lines to this file");
  CLI11_PARSE(app, argc, argv);

  std::ofstream report;
  if (!report_path.empty()) {
    report.open(report_path, std::ios::trunc);
    if (!report) {
      std::cerr << "cannot write " << report_path << "\n";
      return 1;
    }
  }

  struct Criterion {
    std::string name;
    std::function<Verdict()> run;
    double limit_s;  // 0: no runtime limit
  };
  const std::vector<Criterion> criteria{
      {"cost-algebra oracle equivalence", oracle_equivalence, 10},
      {"feasibility soak", feasibility_soak, 60},
      {"zipf and chain statistics", zipf_statistics, 0},
      {"gradient suite", gradient_suite, 60},
      {"predictor skill", predictor_skill, 600},
      {"learning signal", [&] { return learning_signal(budget); }, 0},
      {"ablation ordering", [&] { return ablation_ordering(budget); }, 0},
      {"tradeoff trends", [&] { return tradeoff_trends(budget); }, 0},
      {"cache-capacity trends", [&] { return capacity_trends(budget); }, 0},
      {"myopic-bound sanity", [&] { return myopic_bound(budget); }, 0},
  };
  const std::set<int> selected(only.begin(), only.end());

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (criteria[i].limit_s > 0 && secs > criteria[i].limit_s) {
      v.pass = false;
      v.detail += fmt("; over the %.0f s limit", criteria[i].limit_s);
    }
    failed += !v.pass;
    const std::string line = std::string(v.pass ? "PASS" : "FAIL") + " " + std::to_string(id) + " " +
                             criteria[i].name + ": " + v.detail + fmt(" [%.1f s]", secs);
    std::cout << line << std::endl;
    if (report.is_open()) report << line << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
