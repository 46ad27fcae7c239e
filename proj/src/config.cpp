#include "mecvr/config.hpp"

#include <fstream>
#include <set>

namespace mecvr {

using nlohmann::json;

namespace {

// Reads the fields of one JSON object and rejects keys nobody asked for.
class Section {
public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(field(key) + ": " + e.what());
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  Section child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    static const json empty = json::object();
    return Section(it == j_.end() ? empty : *it, field(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown key " + field(it.key().c_str()));
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
void checked(const std::string& section, F&& validate) {
  try {
    validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(section + ": " + e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  checked("environment", [&] { env.validate(); });
  checked("predictor", [&] { predictor.validate(); });
  checked("agent", [&] { agent.validate(); });
  if (predictor.window != env.window_slots)
    throw ConfigError("predictor.window must equal popularity.window_slots");
  if (evaluation.episodes < 1) throw ConfigError("evaluation.episodes must be >= 1");
}

ExperimentConfig default_experiment() {
  ExperimentConfig cfg;
  Rng rng(cfg.transition_seed);
  cfg.env.transition = random_transition_matrix(cfg.env.gamma_space.size(), rng);
  return cfg;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  Section root(j, "");
  root.read("seed", cfg.seed);
  root.read("output_dir", cfg.output_dir);
  std::string agent = agent_name(cfg.agent_kind);
  root.read("agent", agent);
  try {
    cfg.agent_kind = parse_agent(agent);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("agent: ") + e.what());
  }

  {
    auto s = root.child("grid");
    int rows = cfg.env.grid.n_rows(), cols = cfg.env.grid.n_cols();
    int fov_rows = cfg.env.grid.fov_rows(), fov_cols = cfg.env.grid.fov_cols();
    int dh = cfg.env.grid.delta_h(), dv = cfg.env.grid.delta_v();
    std::uint64_t bits = cfg.env.grid.total_bits();
    s.read("rows", rows);
    s.read("cols", cols);
    s.read("fov_rows", fov_rows);
    s.read("fov_cols", fov_cols);
    s.read("stride_h_tiles", dh);
    s.read("stride_v_tiles", dv);
    s.read("video_size_bits", bits);
    s.finish();
    try {
      cfg.env.grid = TileGrid(rows, cols, fov_rows, fov_cols, dh, dv, bits);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("grid: ") + e.what());
    }
  }
  {
    auto s = root.child("popularity");
    s.read("gamma_space", cfg.env.gamma_space);
    s.read("window_slots", cfg.env.window_slots);
    s.read("transition_seed", cfg.transition_seed);
    if (s.has("transition")) {
      s.read("transition", cfg.env.transition);
    } else {
      Rng rng(cfg.transition_seed);
      cfg.env.transition = random_transition_matrix(cfg.env.gamma_space.size(), rng);
    }
    s.finish();
  }
  {
    auto s = root.child("channel");
    auto& c = cfg.env.channel;
    s.read("bandwidth_hz", c.bandwidth_hz);
    s.read("tx_power_w", c.tx_power_w);
    s.read("noise_power_w", c.noise_power_w);
    s.read("distance_m", c.distance_m);
    s.read("pathloss_exponent", c.pathloss_exponent);
    s.read("backhaul_rate_bps", c.backhaul_rate_bps);
    s.finish();
  }
  {
    auto s = root.child("compute");
    auto& c = cfg.env.compute;
    s.read("mec_freq_hz", c.mec_freq_hz);
    s.read("local_freq_hz", c.local_freq_hz);
    s.read("cycles_per_bit", c.cycles_per_bit);
    s.read("mec_kappa_j_per_cycle_hz2", c.mec_kappa);
    s.read("local_kappa_j_per_cycle_hz2", c.local_kappa);
    s.finish();
  }
  {
    auto s = root.child("cost");
    auto& w = cfg.env.weights;
    s.read("omega", w.omega);
    s.read("output_ratio", w.output_ratio);
    s.read("latency_scale_per_s", w.latency_scale);
    s.read("energy_scale_per_j", w.energy_scale);
    s.finish();
  }
  {
    auto s = root.child("cache");
    s.read("local_tiles", cfg.env.local_capacity);
    s.read("mec_tiles", cfg.env.mec_capacity);
    s.finish();
  }
  {
    auto s = root.child("ablation");
    s.read("caching_replacement", cfg.env.flags.caching_replacement);
    s.read("segmentation", cfg.env.flags.segmentation);
    s.finish();
  }
  {
    auto s = root.child("predictor");
    auto& p = cfg.predictor;
    p.window = cfg.env.window_slots;
    s.read("hidden_units", p.hidden);
    s.read("learning_rate", p.learning_rate);
    s.read("dropout", p.dropout);
    s.read("batch", p.batch);
    s.read("iterations", p.iterations);
    s.read("trace_slots", p.trace_length);
    s.finish();
  }
  {
    auto s = root.child("agent_params");
    auto& a = cfg.agent;
    s.read("actor_lr", a.actor_lr);
    s.read("critic_lr", a.critic_lr);
    s.read("discount", a.discount);
    s.read("soft_update", a.soft_update);
    s.read("target_interval_steps", a.target_interval);
    s.read("noise_std", a.noise_std);
    s.read("noise_final_std", a.noise_final_std);
    s.read("batch", a.batch);
    s.read("replay_capacity", a.replay_capacity);
    s.read("episodes", a.episodes);
    s.read("slots_per_episode", a.slots_per_episode);
    s.read("actor_hidden", a.actor_hidden);
    s.read("critic_hidden", a.critic_hidden);
    s.read("channel_state_scale", a.channel_state_scale);
    s.read("reward_scale", a.reward_scale);
    s.finish();
  }
  {
    auto s = root.child("evaluation");
    s.read("seeds", cfg.evaluation.seeds);
    s.read("episodes", cfg.evaluation.episodes);
    s.finish();
  }
  root.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
  return config_from_json(j);
}

json config_to_json(const ExperimentConfig& cfg) {
  const auto& g = cfg.env.grid;
  const auto& a = cfg.agent;
  const auto& p = cfg.predictor;
  return json{
      {"seed", cfg.seed},
      {"output_dir", cfg.output_dir},
      {"agent", agent_name(cfg.agent_kind)},
      {"grid",
       {{"rows", g.n_rows()},
        {"cols", g.n_cols()},
        {"fov_rows", g.fov_rows()},
        {"fov_cols", g.fov_cols()},
        {"stride_h_tiles", g.delta_h()},
        {"stride_v_tiles", g.delta_v()},
        {"video_size_bits", g.total_bits()}}},
      {"popularity",
       {{"gamma_space", cfg.env.gamma_space},
        {"window_slots", cfg.env.window_slots},
        {"transition_seed", cfg.transition_seed},
        {"transition", cfg.env.transition}}},
      {"channel",
       {{"bandwidth_hz", cfg.env.channel.bandwidth_hz},
        {"tx_power_w", cfg.env.channel.tx_power_w},
        {"noise_power_w", cfg.env.channel.noise_power_w},
        {"distance_m", cfg.env.channel.distance_m},
        {"pathloss_exponent", cfg.env.channel.pathloss_exponent},
        {"backhaul_rate_bps", cfg.env.channel.backhaul_rate_bps}}},
      {"compute",
       {{"mec_freq_hz", cfg.env.compute.mec_freq_hz},
        {"local_freq_hz", cfg.env.compute.local_freq_hz},
        {"cycles_per_bit", cfg.env.compute.cycles_per_bit},
        {"mec_kappa_j_per_cycle_hz2", cfg.env.compute.mec_kappa},
        {"local_kappa_j_per_cycle_hz2", cfg.env.compute.local_kappa}}},
      {"cost",
       {{"omega", cfg.env.weights.omega},
        {"output_ratio", cfg.env.weights.output_ratio},
        {"latency_scale_per_s", cfg.env.weights.latency_scale},
        {"energy_scale_per_j", cfg.env.weights.energy_scale}}},
      {"cache", {{"local_tiles", cfg.env.local_capacity}, {"mec_tiles", cfg.env.mec_capacity}}},
      {"ablation",
       {{"caching_replacement", cfg.env.flags.caching_replacement},
        {"segmentation", cfg.env.flags.segmentation}}},
      {"predictor",
       {{"hidden_units", p.hidden},
        {"learning_rate", p.learning_rate},
        {"dropout", p.dropout},
        {"batch", p.batch},
        {"iterations", p.iterations},
        {"trace_slots", p.trace_length}}},
      {"agent_params",
       {{"actor_lr", a.actor_lr},
        {"critic_lr", a.critic_lr},
        {"discount", a.discount},
        {"soft_update", a.soft_update},
        {"target_interval_steps", a.target_interval},
        {"noise_std", a.noise_std},
        {"noise_final_std", a.noise_final_std},
        {"batch", a.batch},
        {"replay_capacity", a.replay_capacity},
        {"episodes", a.episodes},
        {"slots_per_episode", a.slots_per_episode},
        {"actor_hidden", a.actor_hidden},
        {"critic_hidden", a.critic_hidden},
        {"channel_state_scale", a.channel_state_scale},
        {"reward_scale", a.reward_scale}}},
      {"evaluation", {{"seeds", cfg.evaluation.seeds}, {"episodes", cfg.evaluation.episodes}}},
  };
}

json action_to_json(const HybridAction& a) {
  return json{{"offload", a.offload},
              {"store_local", a.store_local},
              {"delete_local", a.delete_local},
              {"store_mec", a.store_mec},
              {"delete_mec", a.delete_mec}};
}

json snapshot_to_json(const SlotSnapshot& s) {
  return json{{"fov", s.fov},
              {"request", s.request},
              {"local_cache", {{"capacity", s.local.capacity()}, {"tiles", s.local.tiles()}}},
              {"mec_cache", {{"capacity", s.mec.capacity()}, {"tiles", s.mec.tiles()}}},
              {"channel_gain", s.channel_gain},
              {"tile_bits", s.tile_bits},
              {"omega", s.weights.omega},
              {"caching_replacement", s.flags.caching_replacement},
              {"segmentation", s.flags.segmentation}};
}

}  // namespace mecvr
