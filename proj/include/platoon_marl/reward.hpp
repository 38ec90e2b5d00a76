#pragma once

// Local holistic reward, its two task components, and the normalized global
// team reward.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "platoon_marl/config.hpp"
#include "platoon_marl/env.hpp"
#include "platoon_marl/errors.hpp"

namespace platoon_marl::reward {

/// Step revenue: `revenue` when the V2I rate margin is non-negative.
inline double step_g(double margin, double revenue) { return margin >= 0.0 ? revenue : 0.0; }

/// Power normalizer F(p) = p / p_max.
inline double power_penalty_f(double power_w, double max_power_w) {
  if (!(power_w >= 0.0) || power_w > max_power_w) throw DomainError("power_penalty_f: power outside [0, p_max]");
  return power_w / max_power_w;
}

/// Quantities of one completed slot that the local reward depends on.
struct LocalInputs {
  double cam_remaining_frac = 0.0;  // zeta_r / zeta
  double aoi_s = 0.0;
  double v2i_rate = 0.0;
  double min_v2i_rate = 0.0;
  int mode = 0;
  double power_w = 0.0;
  double max_power_w = 1.0;
};

inline LocalInputs make_inputs(const PlatoonState& after_slot, const PlatoonOutcome& outcome, const EnvConfig& cfg) {
  LocalInputs in;
  in.cam_remaining_frac = after_slot.cam_remaining_bits / cfg.cam_bits();
  in.aoi_s = after_slot.aoi_s;
  in.v2i_rate = outcome.v2i_rate;
  in.min_v2i_rate = cfg.min_v2i_rate;
  in.mode = outcome.action.mode;
  in.power_w = outcome.action.power_w;
  in.max_power_w = cfg.max_power_w();
  return in;
}

/// r = -k1 zeta_r/zeta - k2 A + k3 G(C - C_min) - k4 F(p). The power term is
/// grouped with the active mode's terms.
inline double local_reward(const LocalInputs& in, const RewardWeights& w) {
  const double cam_term = -w.kappa1 * in.cam_remaining_frac;
  const double aoi_term = -w.kappa2 * in.aoi_s + w.kappa3 * step_g(in.v2i_rate - in.min_v2i_rate, w.revenue);
  const double power_term = w.kappa4 * power_penalty_f(in.power_w, in.max_power_w);
  if (in.mode == 1) return (cam_term - power_term) + aoi_term;
  return cam_term + (aoi_term - power_term);
}

struct TaskRewards {
  double cam = 0.0;  // task 1: CAM transmission
  double aoi = 0.0;  // task 2: AoI minimization
};

inline TaskRewards task_rewards(const LocalInputs& in, const RewardWeights& w) {
  const double theta = in.mode == 1 ? 1.0 : 0.0;
  const double f = power_penalty_f(in.power_w, in.max_power_w);
  TaskRewards r;
  r.cam = -w.kappa1 * in.cam_remaining_frac - theta * w.kappa4 * f;
  r.aoi = -w.kappa2 * in.aoi_s + w.kappa3 * step_g(in.v2i_rate - in.min_v2i_rate, w.revenue) -
          (1.0 - theta) * w.kappa4 * f;
  return r;
}

/// -(1/P) sum_j sum_k log10(I_j[k] + noise), before normalization.
inline double global_reward_raw(std::span<const std::vector<double>> interference_w, double noise_w) {
  double sum = 0.0;
  for (const auto& row : interference_w)
    for (double i : row) {
      if (!(i >= 0.0)) throw DomainError("global_reward: interference must be non-negative");
      sum += std::log10(i + noise_w);
    }
  return -sum / static_cast<double>(interference_w.size());
}

inline double normalize_global(double raw, int num_subchannels, const RewardWeights& w) {
  return (raw / num_subchannels - w.global_norm_offset) / w.global_norm_scale;
}

inline double global_reward(std::span<const std::vector<double>> interference_w, int num_subchannels,
                            double noise_w, const RewardWeights& w) {
  return normalize_global(global_reward_raw(interference_w, noise_w), num_subchannels, w);
}

/// Every reward signal of one slot.
struct RewardBundle {
  std::vector<double> local;
  std::vector<double> task1;
  std::vector<double> task2;
  double global = 0.0;
};

inline RewardBundle compute_rewards(const EnvState& after_slot, const StepOutcome& outcome, const EnvConfig& cfg,
                                    const RewardWeights& w) {
  RewardBundle b;
  std::vector<std::vector<double>> interference;
  for (int j = 0; j < cfg.num_platoons; ++j) {
    const auto& po = outcome.platoons[static_cast<std::size_t>(j)];
    const auto in = make_inputs(after_slot.platoons[static_cast<std::size_t>(j)], po, cfg);
    b.local.push_back(local_reward(in, w));
    const auto t = task_rewards(in, w);
    b.task1.push_back(t.cam);
    b.task2.push_back(t.aoi);
    interference.push_back(po.interference_w);
  }
  b.global = global_reward(interference, cfg.num_subchannels, cfg.noise_power_w(), w);
  return b;
}

}  // namespace platoon_marl::reward
