#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "platoon_marl/channel.hpp"
#include "platoon_marl/errors.hpp"
#include "platoon_marl/units.hpp"

namespace platoon_marl {

/// Scenario and radio parameters. Defaults follow the urban simulation table
/// (2 GHz, 3 RBs of 180 kHz, 30 dBm, -114 dBm noise, 4000-byte CAM in 100 ms).
struct EnvConfig {
  int num_platoons = 5;
  int followers_per_platoon = 3;
  int num_subchannels = 3;
  double subchannel_bandwidth_hz = 180e3;
  double slot_length_s = 1e-3;
  int episode_slots = 100;
  double cam_size_bytes = 4000.0;
  double min_v2i_rate = 3.0;  // bits/s/Hz
  double max_power_dbm = 30.0;
  double noise_power_dbm = -114.0;
  double carrier_ghz = 2.0;

  double intra_platoon_gap_m = 25.0;
  double vehicle_length_m = 5.0;
  double speed_min_kmh = 36.0;
  double speed_max_kmh = 54.0;
  double road_half_length_m = 250.0;
  double lane_width_m = 3.5;
  double turn_probability = 0.0;

  double rsu_antenna_height_m = 25.0;
  double vehicle_antenna_height_m = 1.5;
  double rsu_antenna_gain_dbi = 8.0;
  double vehicle_antenna_gain_dbi = 3.0;
  double rsu_noise_figure_db = 5.0;
  double vehicle_noise_figure_db = 9.0;

  double v2i_shadowing_std_db = 8.0;
  double v2v_shadowing_std_db = 3.0;
  double v2i_decorrelation_m = 50.0;
  double v2v_decorrelation_m = 10.0;
  int large_scale_epoch_slots = 100;
  channel::V2vPathlossModel v2v_pathloss_model = channel::V2vPathlossModel::winner_b1_los;

  bool aoi_persists_across_episodes = false;

  // Observation normalization: x_norm = (x_db - offset) / scale.
  double obs_gain_offset_db = -80.0;
  double obs_gain_scale_db = 30.0;
  double obs_interference_offset_dbw = -110.0;
  double obs_interference_scale_db = 35.0;
  // AoI is observed as A / scale; 0 selects the time budget.
  double obs_aoi_scale_s = 0.0;

  double aoi_observation_scale_s() const { return obs_aoi_scale_s > 0.0 ? obs_aoi_scale_s : time_budget_s(); }

  double cam_bits() const { return cam_size_bytes * 8.0; }
  double time_budget_s() const { return episode_slots * slot_length_s; }
  double max_power_w() const { return units::dbm_to_watts(max_power_dbm); }
  double noise_power_w() const { return units::dbm_to_watts(noise_power_dbm); }
  int observation_size() const { return 3 * num_subchannels + 3; }
  int action_size() const { return num_subchannels + 2; }
  double platoon_length_m() const {
    return followers_per_platoon * (intra_platoon_gap_m + vehicle_length_m);
  }

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(std::string("invalid environment config: ") + what);
    };
    require(num_platoons >= 1, "env.num_platoons must be >= 1");
    require(followers_per_platoon >= 1, "env.followers_per_platoon must be >= 1");
    require(num_subchannels >= 1, "env.num_subchannels must be >= 1");
    require(subchannel_bandwidth_hz > 0.0, "env.subchannel_bandwidth_hz must be positive");
    require(slot_length_s > 0.0, "env.slot_length_s must be positive");
    require(episode_slots >= 1, "env.episode_slots must be >= 1");
    require(cam_size_bytes > 0.0, "env.cam_size_bytes must be positive");
    require(min_v2i_rate >= 0.0, "env.min_v2i_rate must be non-negative");
    require(std::isfinite(max_power_dbm), "env.max_power_dbm must be finite");
    require(std::isfinite(noise_power_dbm), "env.noise_power_dbm must be finite");
    require(carrier_ghz > 0.0, "env.carrier_ghz must be positive");
    require(intra_platoon_gap_m > 0.0, "env.intra_platoon_gap_m must be positive");
    require(vehicle_length_m >= 0.0, "env.vehicle_length_m must be non-negative");
    require(speed_min_kmh >= 0.0 && speed_max_kmh >= speed_min_kmh, "env speed range must satisfy 0 <= min <= max");
    require(road_half_length_m > 0.0, "env.road_half_length_m must be positive");
    require(lane_width_m > 0.0, "env.lane_width_m must be positive");
    require(turn_probability >= 0.0 && turn_probability <= 1.0, "env.turn_probability must lie in [0, 1]");
    require(rsu_antenna_height_m >= 0.0 && vehicle_antenna_height_m >= 0.0, "antenna heights must be non-negative");
    require(v2i_shadowing_std_db > 0.0 && v2v_shadowing_std_db > 0.0, "shadowing std must be positive");
    require(v2i_decorrelation_m > 0.0 && v2v_decorrelation_m > 0.0, "decorrelation distances must be positive");
    require(large_scale_epoch_slots >= 1, "env.large_scale_epoch_slots must be >= 1");
    require(obs_gain_scale_db > 0.0 && obs_interference_scale_db > 0.0, "observation scales must be positive");
    require(obs_aoi_scale_s >= 0.0, "env.obs_aoi_scale_s must be >= 0");
    if (platoon_length_m() >= 2.0 * road_half_length_m) {
      throw ConfigError("infeasible geometry: platoon length " + std::to_string(platoon_length_m()) +
                        " m does not fit on a road of length " + std::to_string(2.0 * road_half_length_m) + " m");
    }
  }

  bool operator==(const EnvConfig&) const = default;
};

/// Weights of the local reward and constants of the global-reward normalization.
struct RewardWeights {
  double kappa1 = 1.0;  // remaining CAM fraction
  double kappa2 = 5.0;  // per second of AoI
  double kappa3 = 1.0;  // V2I revenue step
  double kappa4 = 0.2;  // power
  double revenue = 1.0;
  // r_g = (raw / K - offset) / scale, raw = -(1/P) sum_j sum_k log10(I_j[k] + noise).
  double global_norm_offset = 11.2;
  double global_norm_scale = 3.2;

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(std::string("invalid reward config: ") + what);
    };
    require(kappa1 >= 0.0 && kappa2 >= 0.0 && kappa3 >= 0.0 && kappa4 >= 0.0, "kappa weights must be >= 0");
    require(std::isfinite(kappa1 + kappa2 + kappa3 + kappa4), "kappa weights must be finite");
    require(revenue > 0.0 && std::isfinite(revenue), "reward.revenue must be positive");
    require(std::isfinite(global_norm_offset), "reward.global_norm_offset must be finite");
    require(global_norm_scale > 0.0 && std::isfinite(global_norm_scale), "reward.global_norm_scale must be positive");
  }

  bool operator==(const RewardWeights&) const = default;
};

enum class Algorithm {
  tdec,           // modified MADDPG with task-decomposed local critics
  modified,       // modified MADDPG (global twin critics + holistic local critic)
  decentralized,  // per-agent actor + local critic, no global critic
  ddpg,           // one centralized actor-critic over the joint observation
  random,         // uniform random raw actions, no learning
};

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::tdec: return "tdec";
    case Algorithm::modified: return "modified";
    case Algorithm::decentralized: return "decentralized";
    case Algorithm::ddpg: return "ddpg";
    case Algorithm::random: return "random";
  }
  return "unknown";
}

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "tdec") return Algorithm::tdec;
  if (s == "modified") return Algorithm::modified;
  if (s == "decentralized") return Algorithm::decentralized;
  if (s == "ddpg") return Algorithm::ddpg;
  if (s == "random") return Algorithm::random;
  throw ConfigError("unknown algorithm '" + s + "' (expected tdec, modified, decentralized, ddpg, random)");
}

struct TrainConfig {
  Algorithm algorithm = Algorithm::tdec;
  int episodes = 500;
  int minibatch = 64;
  double discount = 0.99;
  double tau = 0.0005;
  int policy_delay = 2;
  double smoothing_noise_std = 0.2;
  double noise_clip = 0.5;
  double explore_std_initial = 0.2;
  double explore_std_final = 0.05;
  std::size_t buffer_capacity = 50000;
  std::vector<int> actor_hidden{1024, 512};
  std::vector<int> local_critic_hidden{512, 256};
  std::vector<int> global_critic_hidden{1024, 512, 256};
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  // Minibatch update blocks run after each episode's slot loop.
  int updates_per_episode = 1;
  // L2 weight on the actors' output pre-activations; keeps tanh heads out of
  // saturation.
  double actor_preactivation_penalty = 0.0;
  // Per agent and slot, probability of a uniform random action instead of
  // the noisy actor output; decays linearly to the final value.
  double explore_uniform_prob = 0.0;
  double explore_uniform_prob_final = 0.0;
  // Episodes acting uniformly at random before the actors take over.
  int warmup_episodes = 0;
  // Stop bootstrapping at the last slot of an episode.
  bool terminal_at_episode_end = true;

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(std::string("invalid training config: ") + what);
    };
    require(episodes >= 0, "train.episodes must be >= 0");
    require(minibatch >= 1, "train.minibatch must be >= 1");
    require(discount > 0.0 && discount < 1.0, "train.discount must lie in (0, 1)");
    require(tau > 0.0 && tau <= 1.0, "train.tau must lie in (0, 1]");
    require(policy_delay >= 1, "train.policy_delay must be >= 1");
    require(smoothing_noise_std >= 0.0 && noise_clip >= 0.0, "noise parameters must be non-negative");
    require(explore_std_initial >= 0.0 && explore_std_final >= 0.0, "exploration std must be non-negative");
    require(buffer_capacity >= static_cast<std::size_t>(minibatch), "train.buffer_capacity must be >= minibatch");
    require(actor_lr > 0.0 && critic_lr > 0.0, "learning rates must be positive");
    require(actor_preactivation_penalty >= 0.0, "train.actor_preactivation_penalty must be >= 0");
    require(explore_uniform_prob >= 0.0 && explore_uniform_prob <= 1.0, "train.explore_uniform_prob must lie in [0, 1]");
    require(explore_uniform_prob_final >= 0.0 && explore_uniform_prob_final <= 1.0,
            "train.explore_uniform_prob_final must lie in [0, 1]");
    require(warmup_episodes >= 0, "train.warmup_episodes must be >= 0");
    require(updates_per_episode >= 1, "train.updates_per_episode must be >= 1");
    for (const auto* layers : {&actor_hidden, &local_critic_hidden, &global_critic_hidden}) {
      require(!layers->empty(), "hidden layer lists must be non-empty");
      for (int n : *layers) require(n >= 1, "hidden layer sizes must be >= 1");
    }
  }

  bool operator==(const TrainConfig&) const = default;
};

/// Everything one experiment needs: scenario, rewards, training, sweep axes.
struct ExperimentConfig {
  EnvConfig env;
  RewardWeights reward;
  TrainConfig train;

  std::vector<double> sweep_gaps_m{5.0, 15.0, 25.0, 35.0};
  std::vector<int> sweep_platoon_sizes{4};  // vehicles per platoon, leader included
  std::vector<Algorithm> sweep_algorithms{Algorithm::tdec, Algorithm::modified, Algorithm::decentralized,
                                          Algorithm::ddpg};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string output_dir = "runs";
  double tail_fraction = 0.2;
  int moving_average_window = 10;
  bool record_wall_clock = false;

  void validate() const {
    env.validate();
    reward.validate();
    train.validate();
    auto require = [](bool ok, const std::string& what) {
      if (!ok) throw ConfigError("invalid experiment config: " + what);
    };
    require(!sweep_gaps_m.empty(), "experiment.gaps_m must be non-empty");
    for (double g : sweep_gaps_m) require(g > 0.0, "experiment.gaps_m entries must be positive");
    require(!sweep_platoon_sizes.empty(), "experiment.platoon_sizes must be non-empty");
    for (int n : sweep_platoon_sizes) require(n >= 2, "experiment.platoon_sizes entries must be >= 2");
    require(!sweep_algorithms.empty(), "experiment.algorithms must be non-empty");
    require(!seeds.empty(), "experiment.seeds must be non-empty");
    for (std::size_t i = 0; i < seeds.size(); ++i)
      for (std::size_t j = i + 1; j < seeds.size(); ++j)
        require(seeds[i] != seeds[j], "experiment.seeds must be distinct");
    require(tail_fraction > 0.0 && tail_fraction <= 1.0, "experiment.tail_fraction must lie in (0, 1]");
    require(moving_average_window >= 1, "experiment.moving_average_window must be >= 1");
    require(!output_dir.empty(), "experiment.output_dir must be non-empty");
    // Every sweep point must be a valid standalone scenario.
    for (double g : sweep_gaps_m) {
      for (int n : sweep_platoon_sizes) {
        EnvConfig e = env;
        e.intra_platoon_gap_m = g;
        e.followers_per_platoon = n - 1;
        e.validate();
      }
    }
  }

  bool operator==(const ExperimentConfig&) const = default;
};

}  // namespace platoon_marl
