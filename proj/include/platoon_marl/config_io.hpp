#pragma once

// Plain-text experiment configuration: one `section.key = value` per line,
// `#` starts a comment, lists are comma separated. Omitted keys keep their
// defaults; unknown or repeated keys are rejected.

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "platoon_marl/config.hpp"
#include "platoon_marl/errors.hpp"

namespace platoon_marl {

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("empty list element");
    out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) throw ConfigError("expected a number, got '" + s + "'");
  return v;
}

template <typename Int>
Int parse_int(const std::string& s) {
  Int v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ConfigError("expected an integer, got '" + s + "'");
  return v;
}

inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("expected true or false, got '" + s + "'");
}

/// Shortest text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[40];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + fmt(xs[i]);
  return out;
}

struct Binding {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> parse;
  std::function<std::string(const ExperimentConfig&)> format;
};

template <typename Get>
Binding real(std::string key, Get get) {
  return {std::move(key), [get](ExperimentConfig& c, const std::string& v) { get(c) = parse_double(v); },
          [get](const ExperimentConfig& c) { return format_double(get(c)); }};
}

template <typename Get>
Binding integer(std::string key, Get get) {
  return {std::move(key),
          [get](ExperimentConfig& c, const std::string& v) {
            auto& ref = get(c);
            ref = parse_int<std::remove_reference_t<decltype(ref)>>(v);
          },
          [get](const ExperimentConfig& c) { return std::to_string(get(c)); }};
}

template <typename Get>
Binding boolean(std::string key, Get get) {
  return {std::move(key), [get](ExperimentConfig& c, const std::string& v) { get(c) = parse_bool(v); },
          [get](const ExperimentConfig& c) { return std::string(get(c) ? "true" : "false"); }};
}

template <typename Get>
Binding int_list(std::string key, Get get) {
  return {std::move(key),
          [get](ExperimentConfig& c, const std::string& v) {
            auto& ref = get(c);
            ref.clear();
            for (const auto& x : split_list(v)) ref.push_back(parse_int<typename std::remove_reference_t<decltype(ref)>::value_type>(x));
          },
          [get](const ExperimentConfig& c) {
            return join(get(c), [](auto x) { return std::to_string(x); });
          }};
}

#define PM_FIELD(expr) [](auto& c) -> auto& { return c.expr; }

inline const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = [] {
    std::vector<Binding> b;
    // env
    b.push_back(integer("env.num_platoons", PM_FIELD(env.num_platoons)));
    b.push_back(integer("env.followers_per_platoon", PM_FIELD(env.followers_per_platoon)));
    b.push_back(integer("env.num_subchannels", PM_FIELD(env.num_subchannels)));
    b.push_back(real("env.subchannel_bandwidth_hz", PM_FIELD(env.subchannel_bandwidth_hz)));
    b.push_back(real("env.slot_length_s", PM_FIELD(env.slot_length_s)));
    b.push_back(integer("env.episode_slots", PM_FIELD(env.episode_slots)));
    b.push_back(real("env.cam_size_bytes", PM_FIELD(env.cam_size_bytes)));
    b.push_back(real("env.min_v2i_rate", PM_FIELD(env.min_v2i_rate)));
    b.push_back(real("env.max_power_dbm", PM_FIELD(env.max_power_dbm)));
    b.push_back(real("env.noise_power_dbm", PM_FIELD(env.noise_power_dbm)));
    b.push_back(real("env.carrier_ghz", PM_FIELD(env.carrier_ghz)));
    b.push_back(real("env.intra_platoon_gap_m", PM_FIELD(env.intra_platoon_gap_m)));
    b.push_back(real("env.vehicle_length_m", PM_FIELD(env.vehicle_length_m)));
    b.push_back(real("env.speed_min_kmh", PM_FIELD(env.speed_min_kmh)));
    b.push_back(real("env.speed_max_kmh", PM_FIELD(env.speed_max_kmh)));
    b.push_back(real("env.road_half_length_m", PM_FIELD(env.road_half_length_m)));
    b.push_back(real("env.lane_width_m", PM_FIELD(env.lane_width_m)));
    b.push_back(real("env.turn_probability", PM_FIELD(env.turn_probability)));
    b.push_back(real("env.rsu_antenna_height_m", PM_FIELD(env.rsu_antenna_height_m)));
    b.push_back(real("env.vehicle_antenna_height_m", PM_FIELD(env.vehicle_antenna_height_m)));
    b.push_back(real("env.rsu_antenna_gain_dbi", PM_FIELD(env.rsu_antenna_gain_dbi)));
    b.push_back(real("env.vehicle_antenna_gain_dbi", PM_FIELD(env.vehicle_antenna_gain_dbi)));
    b.push_back(real("env.rsu_noise_figure_db", PM_FIELD(env.rsu_noise_figure_db)));
    b.push_back(real("env.vehicle_noise_figure_db", PM_FIELD(env.vehicle_noise_figure_db)));
    b.push_back(real("env.v2i_shadowing_std_db", PM_FIELD(env.v2i_shadowing_std_db)));
    b.push_back(real("env.v2v_shadowing_std_db", PM_FIELD(env.v2v_shadowing_std_db)));
    b.push_back(real("env.v2i_decorrelation_m", PM_FIELD(env.v2i_decorrelation_m)));
    b.push_back(real("env.v2v_decorrelation_m", PM_FIELD(env.v2v_decorrelation_m)));
    b.push_back(integer("env.large_scale_epoch_slots", PM_FIELD(env.large_scale_epoch_slots)));
    b.push_back({"env.v2v_pathloss_model",
                 [](ExperimentConfig& c, const std::string& v) { c.env.v2v_pathloss_model = channel::v2v_model_from_string(v); },
                 [](const ExperimentConfig& c) { return channel::to_string(c.env.v2v_pathloss_model); }});
    b.push_back(boolean("env.aoi_persists_across_episodes", PM_FIELD(env.aoi_persists_across_episodes)));
    b.push_back(real("env.obs_gain_offset_db", PM_FIELD(env.obs_gain_offset_db)));
    b.push_back(real("env.obs_gain_scale_db", PM_FIELD(env.obs_gain_scale_db)));
    b.push_back(real("env.obs_interference_offset_dbw", PM_FIELD(env.obs_interference_offset_dbw)));
    b.push_back(real("env.obs_interference_scale_db", PM_FIELD(env.obs_interference_scale_db)));
    b.push_back(real("env.obs_aoi_scale_s", PM_FIELD(env.obs_aoi_scale_s)));
    // reward
    b.push_back(real("reward.kappa1", PM_FIELD(reward.kappa1)));
    b.push_back(real("reward.kappa2", PM_FIELD(reward.kappa2)));
    b.push_back(real("reward.kappa3", PM_FIELD(reward.kappa3)));
    b.push_back(real("reward.kappa4", PM_FIELD(reward.kappa4)));
    b.push_back(real("reward.revenue", PM_FIELD(reward.revenue)));
    b.push_back(real("reward.global_norm_offset", PM_FIELD(reward.global_norm_offset)));
    b.push_back(real("reward.global_norm_scale", PM_FIELD(reward.global_norm_scale)));
    // train
    b.push_back({"train.algorithm",
                 [](ExperimentConfig& c, const std::string& v) { c.train.algorithm = algorithm_from_string(v); },
                 [](const ExperimentConfig& c) { return to_string(c.train.algorithm); }});
    b.push_back(integer("train.episodes", PM_FIELD(train.episodes)));
    b.push_back(integer("train.minibatch", PM_FIELD(train.minibatch)));
    b.push_back(real("train.discount", PM_FIELD(train.discount)));
    b.push_back(real("train.tau", PM_FIELD(train.tau)));
    b.push_back(integer("train.policy_delay", PM_FIELD(train.policy_delay)));
    b.push_back(real("train.smoothing_noise_std", PM_FIELD(train.smoothing_noise_std)));
    b.push_back(real("train.noise_clip", PM_FIELD(train.noise_clip)));
    b.push_back(real("train.explore_std_initial", PM_FIELD(train.explore_std_initial)));
    b.push_back(real("train.explore_std_final", PM_FIELD(train.explore_std_final)));
    b.push_back(real("train.explore_uniform_prob", PM_FIELD(train.explore_uniform_prob)));
    b.push_back(real("train.explore_uniform_prob_final", PM_FIELD(train.explore_uniform_prob_final)));
    b.push_back(integer("train.warmup_episodes", PM_FIELD(train.warmup_episodes)));
    b.push_back(integer("train.buffer_capacity", PM_FIELD(train.buffer_capacity)));
    b.push_back(int_list("train.actor_hidden", PM_FIELD(train.actor_hidden)));
    b.push_back(int_list("train.local_critic_hidden", PM_FIELD(train.local_critic_hidden)));
    b.push_back(int_list("train.global_critic_hidden", PM_FIELD(train.global_critic_hidden)));
    b.push_back(real("train.actor_lr", PM_FIELD(train.actor_lr)));
    b.push_back(real("train.critic_lr", PM_FIELD(train.critic_lr)));
    b.push_back(real("train.actor_preactivation_penalty", PM_FIELD(train.actor_preactivation_penalty)));
    b.push_back(integer("train.updates_per_episode", PM_FIELD(train.updates_per_episode)));
    b.push_back(boolean("train.terminal_at_episode_end", PM_FIELD(train.terminal_at_episode_end)));
    // experiment
    b.push_back({"experiment.gaps_m",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.sweep_gaps_m.clear();
                   for (const auto& x : split_list(v)) c.sweep_gaps_m.push_back(parse_double(x));
                 },
                 [](const ExperimentConfig& c) { return join(c.sweep_gaps_m, format_double); }});
    b.push_back(int_list("experiment.platoon_sizes", PM_FIELD(sweep_platoon_sizes)));
    b.push_back({"experiment.algorithms",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.sweep_algorithms.clear();
                   for (const auto& x : split_list(v)) c.sweep_algorithms.push_back(algorithm_from_string(x));
                 },
                 [](const ExperimentConfig& c) {
                   return join(c.sweep_algorithms, [](Algorithm a) { return to_string(a); });
                 }});
    b.push_back(int_list("experiment.seeds", PM_FIELD(seeds)));
    b.push_back({"experiment.output_dir", [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
                 [](const ExperimentConfig& c) { return c.output_dir; }});
    b.push_back(real("experiment.tail_fraction", PM_FIELD(tail_fraction)));
    b.push_back(integer("experiment.moving_average_window", PM_FIELD(moving_average_window)));
    b.push_back(boolean("experiment.record_wall_clock", PM_FIELD(record_wall_clock)));
    return b;
  }();
  return table;
}

#undef PM_FIELD

inline const Binding* find_binding(const std::string& key) {
  for (const auto& b : bindings())
    if (b.key == key) return &b;
  return nullptr;
}

}  // namespace config_detail

/// Every key understood by the parser, in file order.
inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& b : config_detail::bindings()) keys.push_back(b.key);
  return keys;
}

/// Parses config text; `origin` prefixes diagnostics ("file:line: ...").
/// The result is validated; a failed constraint is reported against the line
/// that set the offending key when one did.
inline ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "<config>") {
  using namespace config_detail;
  ExperimentConfig cfg;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto where = origin + ":" + std::to_string(lineno) + ": ";
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const Binding* b = find_binding(key);
    if (b == nullptr) throw ConfigError(where + "unknown key '" + key + "'");
    if (seen.count(key)) throw ConfigError(where + "key '" + key + "' already set on line " + std::to_string(seen[key]));
    if (value.empty()) throw ConfigError(where + "missing value for '" + key + "'");
    try {
      b->parse(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
    seen[key] = lineno;
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    std::string best;
    for (const auto& [key, ln] : seen)
      if (msg.find(key) != std::string::npos && key.size() > best.size()) best = key;
    if (!best.empty()) throw ConfigError(origin + ":" + std::to_string(seen[best]) + ": " + msg);
    throw ConfigError(origin + ": " + msg);
  }
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str(), path);
}

/// Writes every key; the output parses back to an equal config.
inline std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& b : config_detail::bindings()) out += b.key + " = " + b.format(cfg) + "\n";
  return out;
}

}  // namespace platoon_marl
