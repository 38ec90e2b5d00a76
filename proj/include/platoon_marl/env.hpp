#pragma once

// Episodic multi-platoon C-V2X simulation: mobility on two crossing roads with
// the RSU at the intersection, per-slot V2I/V2V rates with co-channel
// interference, AoI evolution and CAM payload accounting.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "platoon_marl/channel.hpp"
#include "platoon_marl/config.hpp"
#include "platoon_marl/errors.hpp"
#include "platoon_marl/rng.hpp"
#include "platoon_marl/units.hpp"

namespace platoon_marl {

using channel::Point;

struct ActionCommand {
  int subchannel = 0;  // beta
  int mode = 0;        // theta: 1 = intra-platoon broadcast, 0 = V2I
  double power_w = 0.0;

  bool operator==(const ActionCommand&) const = default;
};

/// Maps a raw actor output to [0, 1]; monotone, saturating at -1 and +1.
inline double squash(double x) { return std::clamp(0.5 * (x + 1.0), 0.0, 1.0); }

/// raw = [K subchannel scores | mode score | power score].
inline ActionCommand decode_action(std::span<const double> raw, const EnvConfig& cfg) {
  const auto k = static_cast<std::size_t>(cfg.num_subchannels);
  if (raw.size() != k + 2) throw DecodeError("decode_action: expected K+2 raw entries");
  for (double v : raw)
    if (std::isnan(v)) throw DecodeError("decode_action: NaN in raw action");
  ActionCommand a;
  for (std::size_t i = 1; i < k; ++i)
    if (raw[i] > raw[a.subchannel]) a.subchannel = static_cast<int>(i);
  a.mode = raw[k] >= 0.0 ? 1 : 0;
  a.power_w = cfg.max_power_w() * squash(raw[k + 1]);
  return a;
}

/// Linear channel gains for one slot.
///   v2i(j, k)          PL j -> RSU (also the interfering gain at the RSU)
///   v2v(tx, rx, i, k)  PL tx -> follower i of platoon rx
class ChannelSnapshot {
 public:
  ChannelSnapshot() = default;
  ChannelSnapshot(int platoons, int followers, int subchannels)
      : p_(platoons), f_(followers), k_(subchannels),
        v2i_(static_cast<std::size_t>(platoons * subchannels), 0.0),
        v2v_(static_cast<std::size_t>(platoons * platoons * followers * subchannels), 0.0) {}

  int platoons() const { return p_; }
  int followers() const { return f_; }
  int subchannels() const { return k_; }

  double& v2i(int j, int k) { return v2i_[static_cast<std::size_t>(j * k_ + k)]; }
  double v2i(int j, int k) const { return v2i_[static_cast<std::size_t>(j * k_ + k)]; }
  double& v2v(int tx, int rx, int i, int k) { return v2v_[v2v_index(tx, rx, i, k)]; }
  double v2v(int tx, int rx, int i, int k) const { return v2v_[v2v_index(tx, rx, i, k)]; }

  bool operator==(const ChannelSnapshot&) const = default;

 private:
  std::size_t v2v_index(int tx, int rx, int i, int k) const {
    return static_cast<std::size_t>(((tx * p_ + rx) * f_ + i) * k_ + k);
  }

  int p_ = 0, f_ = 0, k_ = 0;
  std::vector<double> v2i_;
  std::vector<double> v2v_;
};

struct PlatoonState {
  Point leader_position;
  std::vector<Point> follower_positions;
  double aoi_s = 0.0;
  double cam_remaining_bits = 0.0;
  double time_budget_remaining_s = 0.0;
  bool cam_delivered = false;

  // Mobility: road 0 runs along x, road 1 along y; `along_m` is the leader's
  // coordinate on its road and `direction` its sign of travel.
  int road = 0;
  int direction = 1;
  double lane_offset_m = 0.0;
  double along_m = 0.0;
  double speed_mps = 0.0;

  bool operator==(const PlatoonState&) const = default;
};

struct PlatoonOutcome {
  ActionCommand action;
  double v2i_rate = 0.0;      // bits/s/Hz on the held subchannel
  double v2v_min_rate = 0.0;  // min over followers, bits/s/Hz
  std::vector<double> interference_w;  // I_j[k] at the RSU, all k
  bool v2i_success = false;

  bool operator==(const PlatoonOutcome&) const = default;
};

struct StepOutcome {
  std::vector<PlatoonOutcome> platoons;

  bool operator==(const StepOutcome&) const = default;
};

/// Large-scale states for every link, frozen within a large-scale epoch.
struct LargeScaleField {
  std::vector<channel::LargeScaleState> v2i;  // [j]
  std::vector<channel::LargeScaleState> v2v;  // [(tx * P + rx) * F + i]

  bool operator==(const LargeScaleField&) const = default;
};

struct EnvState {
  std::vector<PlatoonState> platoons;
  LargeScaleField large_scale;
  ChannelSnapshot snapshot;  // gains valid for the upcoming slot
  std::optional<StepOutcome> previous;  // outcome of the last completed slot
  int slot = 0;
  int episode = 0;

  bool operator==(const EnvState&) const = default;
};

struct Observation {
  std::vector<double> v2i_gains;
  std::vector<double> v2v_gains_min;
  std::vector<double> prev_interference;
  double aoi = 0.0;
  double cam_remaining_frac = 0.0;
  double time_budget_frac = 0.0;

  /// Flat layout fed to the networks: 3K+3 values.
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(v2i_gains.size() * 3 + 3);
    out.insert(out.end(), v2i_gains.begin(), v2i_gains.end());
    out.insert(out.end(), v2v_gains_min.begin(), v2v_gains_min.end());
    out.insert(out.end(), prev_interference.begin(), prev_interference.end());
    out.push_back(aoi);
    out.push_back(cam_remaining_frac);
    out.push_back(time_budget_frac);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Rates

struct V2iResult {
  double rate = 0.0;
  std::vector<double> interference_w;  // per subchannel, other platoons only
};

/// Shannon rate to the RSU; interference from every other platoon on the
/// same subchannel regardless of its mode.
inline V2iResult compute_v2i_rate(int j, std::span<const ActionCommand> actions, const ChannelSnapshot& snap,
                                  const EnvConfig& cfg) {
  const int p = static_cast<int>(actions.size());
  V2iResult r;
  r.interference_w.assign(static_cast<std::size_t>(cfg.num_subchannels), 0.0);
  for (int k = 0; k < cfg.num_subchannels; ++k) {
    double sum = 0.0;
    for (int jp = 0; jp < p; ++jp) {
      if (jp == j || actions[jp].subchannel != k) continue;
      sum += actions[jp].power_w * snap.v2i(jp, k);
    }
    r.interference_w[static_cast<std::size_t>(k)] = sum;
  }
  const ActionCommand& a = actions[j];
  const double signal = (1 - a.mode) * a.power_w * snap.v2i(j, a.subchannel);
  r.rate = std::log2(1.0 + signal / (r.interference_w[static_cast<std::size_t>(a.subchannel)] + cfg.noise_power_w()));
  return r;
}

/// Per-follower broadcast rates of platoon j on its held subchannel.
inline std::vector<double> compute_v2v_rates(int j, std::span<const ActionCommand> actions,
                                             const ChannelSnapshot& snap, const EnvConfig& cfg) {
  const int p = static_cast<int>(actions.size());
  const ActionCommand& a = actions[j];
  const int k = a.subchannel;
  std::vector<double> rates;
  rates.reserve(static_cast<std::size_t>(snap.followers()));
  for (int i = 0; i < snap.followers(); ++i) {
    double interference = 0.0;
    for (int jp = 0; jp < p; ++jp) {
      if (jp == j || actions[jp].subchannel != k) continue;
      interference += actions[jp].power_w * snap.v2v(jp, j, i, k);
    }
    const double signal = a.mode * a.power_w * snap.v2v(j, j, i, k);
    rates.push_back(std::log2(1.0 + signal / (interference + cfg.noise_power_w())));
  }
  return rates;
}

/// min over followers of the broadcast rate.
inline double compute_v2v_rate(int j, std::span<const ActionCommand> actions, const ChannelSnapshot& snap,
                               const EnvConfig& cfg) {
  const auto rates = compute_v2v_rates(j, actions, snap, cfg);
  return *std::min_element(rates.begin(), rates.end());
}

// ---------------------------------------------------------------------------
// Per-platoon bookkeeping

inline bool v2i_succeeded(const ActionCommand& a, double v2i_rate, const EnvConfig& cfg) {
  return a.mode == 0 && v2i_rate >= cfg.min_v2i_rate;
}

/// Reset to one slot on a successful V2I update, otherwise age by one slot.
inline double update_aoi(const PlatoonState& platoon, const PlatoonOutcome& outcome, const EnvConfig& cfg) {
  return outcome.v2i_success ? cfg.slot_length_s : platoon.aoi_s + cfg.slot_length_s;
}

/// Drains the CAM payload by the slot's broadcast volume and consumes one slot
/// of time budget. Returns the remaining payload in bits.
inline double update_cam(PlatoonState& platoon, const PlatoonOutcome& outcome, const EnvConfig& cfg) {
  if (outcome.action.mode == 1) {
    const double sent = outcome.v2v_min_rate * cfg.subchannel_bandwidth_hz * cfg.slot_length_s;
    platoon.cam_remaining_bits = std::max(0.0, platoon.cam_remaining_bits - sent);
  }
  if (platoon.cam_remaining_bits == 0.0) platoon.cam_delivered = true;
  platoon.time_budget_remaining_s = std::max(0.0, platoon.time_budget_remaining_s - cfg.slot_length_s);
  return platoon.cam_remaining_bits;
}

// ---------------------------------------------------------------------------
// Geometry

namespace detail {

inline Point road_point(int road, double along, double lane_offset) {
  return road == 0 ? Point{along, lane_offset} : Point{lane_offset, along};
}

inline void place_platoon(PlatoonState& s, const EnvConfig& cfg) {
  s.leader_position = road_point(s.road, s.along_m, s.lane_offset_m);
  s.follower_positions.resize(static_cast<std::size_t>(cfg.followers_per_platoon));
  const double spacing = cfg.intra_platoon_gap_m + cfg.vehicle_length_m;
  for (int i = 0; i < cfg.followers_per_platoon; ++i) {
    const double along = s.along_m - s.direction * (i + 1) * spacing;
    s.follower_positions[static_cast<std::size_t>(i)] = road_point(s.road, along, s.lane_offset_m);
  }
}

/// Platoon j drives on road j%2, alternating direction every two platoons and
/// moving one lane outward every four.
inline void assign_lane(PlatoonState& s, int j, const EnvConfig& cfg) {
  s.road = j % 2;
  s.direction = ((j / 2) % 2 == 0) ? 1 : -1;
  s.lane_offset_m = s.direction * cfg.lane_width_m * (0.5 + j / 4);
}

inline void advance_platoon(PlatoonState& s, const EnvConfig& cfg, Rng& rng) {
  const double before = s.along_m;
  s.along_m += s.direction * s.speed_mps * cfg.slot_length_s;
  const bool crossed = (before < 0.0 && s.along_m >= 0.0) || (before > 0.0 && s.along_m <= 0.0);
  if (crossed && cfg.turn_probability > 0.0 && uniform(rng, 0.0, 1.0) < cfg.turn_probability) {
    const double past = std::abs(s.along_m);
    s.road = 1 - s.road;
    s.along_m = s.direction * past;
  }
  const double half = cfg.road_half_length_m;
  if (s.along_m > half) s.along_m -= 2.0 * half;
  if (s.along_m < -half) s.along_m += 2.0 * half;
  place_platoon(s, cfg);
}

inline channel::LinkParams v2i_params(const EnvConfig& cfg) {
  channel::LinkParams p;
  p.kind = channel::LinkKind::v2i;
  p.carrier_ghz = cfg.carrier_ghz;
  p.shadowing_sigma_db = cfg.v2i_shadowing_std_db;
  p.decorrelation_m = cfg.v2i_decorrelation_m;
  p.antenna_gain_db = cfg.vehicle_antenna_gain_dbi + cfg.rsu_antenna_gain_dbi;
  p.noise_figure_db = cfg.rsu_noise_figure_db;
  return p;
}

inline channel::LinkParams v2v_params(const EnvConfig& cfg) {
  channel::LinkParams p;
  p.kind = channel::LinkKind::v2v;
  p.carrier_ghz = cfg.carrier_ghz;
  p.shadowing_sigma_db = cfg.v2v_shadowing_std_db;
  p.decorrelation_m = cfg.v2v_decorrelation_m;
  p.antenna_gain_db = 2.0 * cfg.vehicle_antenna_gain_dbi;
  p.noise_figure_db = cfg.vehicle_noise_figure_db;
  p.v2v_model = cfg.v2v_pathloss_model;
  return p;
}

inline channel::LinkGeometry v2i_geometry(const PlatoonState& s, const EnvConfig& cfg) {
  return {s.leader_position, Point{0.0, 0.0}, channel::LinkKind::v2i, cfg.vehicle_antenna_height_m,
          cfg.rsu_antenna_height_m};
}

inline channel::LinkGeometry v2v_geometry(const PlatoonState& tx, const PlatoonState& rx, int i,
                                          const EnvConfig& cfg) {
  return {tx.leader_position, rx.follower_positions[static_cast<std::size_t>(i)], channel::LinkKind::v2v,
          cfg.vehicle_antenna_height_m, cfg.vehicle_antenna_height_m};
}

inline std::size_t v2v_link(int tx, int rx, int i, const EnvConfig& cfg) {
  return static_cast<std::size_t>((tx * cfg.num_platoons + rx) * cfg.followers_per_platoon + i);
}

inline void draw_large_scale(EnvState& st, const EnvConfig& cfg, Rng& rng, bool fresh) {
  const auto pi = v2i_params(cfg);
  const auto pv = v2v_params(cfg);
  const int p = cfg.num_platoons;
  const int f = cfg.followers_per_platoon;
  if (fresh) {
    st.large_scale.v2i.clear();
    st.large_scale.v2v.clear();
    for (int j = 0; j < p; ++j)
      st.large_scale.v2i.push_back(channel::init_large_scale(pi, v2i_geometry(st.platoons[j], cfg), rng));
    for (int tx = 0; tx < p; ++tx)
      for (int rx = 0; rx < p; ++rx)
        for (int i = 0; i < f; ++i)
          st.large_scale.v2v.push_back(
              channel::init_large_scale(pv, v2v_geometry(st.platoons[tx], st.platoons[rx], i, cfg), rng));
    return;
  }
  for (int j = 0; j < p; ++j)
    channel::refresh_large_scale(st.large_scale.v2i[static_cast<std::size_t>(j)], pi,
                                 v2i_geometry(st.platoons[j], cfg), rng);
  for (int tx = 0; tx < p; ++tx)
    for (int rx = 0; rx < p; ++rx)
      for (int i = 0; i < f; ++i)
        channel::refresh_large_scale(st.large_scale.v2v[v2v_link(tx, rx, i, cfg)], pv,
                                     v2v_geometry(st.platoons[tx], st.platoons[rx], i, cfg), rng);
}

/// Fresh Rayleigh draws for every link and subchannel on top of the frozen large-scale field.
inline void draw_fast_fading(EnvState& st, const EnvConfig& cfg, Rng& rng) {
  const int p = cfg.num_platoons;
  const int f = cfg.followers_per_platoon;
  const int kk = cfg.num_subchannels;
  st.snapshot = ChannelSnapshot(p, f, kk);
  for (int j = 0; j < p; ++j) {
    const auto& ls = st.large_scale.v2i[static_cast<std::size_t>(j)];
    for (int k = 0; k < kk; ++k) st.snapshot.v2i(j, k) = channel::compose_gain(ls, channel::sample_rayleigh_power(rng));
  }
  for (int tx = 0; tx < p; ++tx)
    for (int rx = 0; rx < p; ++rx)
      for (int i = 0; i < f; ++i) {
        const auto& ls = st.large_scale.v2v[v2v_link(tx, rx, i, cfg)];
        for (int k = 0; k < kk; ++k)
          st.snapshot.v2v(tx, rx, i, k) = channel::compose_gain(ls, channel::sample_rayleigh_power(rng));
      }
}

inline double normalize_gain(double gain, const EnvConfig& cfg) {
  const double db = units::linear_to_db(std::max(gain, 1e-30));
  return (db - cfg.obs_gain_offset_db) / cfg.obs_gain_scale_db;
}

inline double normalize_interference(double interference_w, const EnvConfig& cfg) {
  const double dbw = units::linear_to_db(interference_w + cfg.noise_power_w());
  return (dbw - cfg.obs_interference_offset_dbw) / cfg.obs_interference_scale_db;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Episode lifecycle

/// Starts an episode. With `previous` the platoons keep moving from where they
/// were and shadowing decorrelates against their displacement; without it the
/// platoons are placed afresh.
inline EnvState init_episode(const EnvConfig& cfg, Rng& rng, const EnvState* previous = nullptr) {
  cfg.validate();
  EnvState st;
  if (previous == nullptr) {
    const double half = cfg.road_half_length_m;
    const double speed_lo = units::kmh_to_mps(cfg.speed_min_kmh);
    const double speed_hi = units::kmh_to_mps(cfg.speed_max_kmh);
    st.platoons.resize(static_cast<std::size_t>(cfg.num_platoons));
    for (int j = 0; j < cfg.num_platoons; ++j) {
      auto& s = st.platoons[static_cast<std::size_t>(j)];
      detail::assign_lane(s, j, cfg);
      s.along_m = uniform(rng, -half, half);
      s.speed_mps = speed_hi > speed_lo ? uniform(rng, speed_lo, speed_hi) : speed_lo;
      s.aoi_s = cfg.slot_length_s;
      detail::place_platoon(s, cfg);
    }
    detail::draw_large_scale(st, cfg, rng, true);
  } else {
    if (previous->platoons.size() != static_cast<std::size_t>(cfg.num_platoons))
      throw ConfigError("init_episode: previous state has a different platoon count");
    st.platoons = previous->platoons;
    st.large_scale = previous->large_scale;
    st.episode = previous->episode + 1;
    for (auto& s : st.platoons) {
      if (!cfg.aoi_persists_across_episodes) s.aoi_s = cfg.slot_length_s;
    }
    detail::draw_large_scale(st, cfg, rng, false);
  }
  for (auto& s : st.platoons) {
    s.cam_remaining_bits = cfg.cam_bits();
    s.time_budget_remaining_s = cfg.time_budget_s();
    s.cam_delivered = false;
  }
  detail::draw_fast_fading(st, cfg, rng);
  return st;
}

/// Observation of platoon j: [v2i gains | min follower gains | previous interference | AoI, CAM, time].
inline Observation build_observation(int j, const EnvState& st, const EnvConfig& cfg) {
  Observation o;
  const int kk = cfg.num_subchannels;
  const auto& s = st.platoons[static_cast<std::size_t>(j)];
  for (int k = 0; k < kk; ++k) {
    o.v2i_gains.push_back(detail::normalize_gain(st.snapshot.v2i(j, k), cfg));
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < cfg.followers_per_platoon; ++i) worst = std::min(worst, st.snapshot.v2v(j, j, i, k));
    o.v2v_gains_min.push_back(detail::normalize_gain(worst, cfg));
    const double interference =
        st.previous ? st.previous->platoons[static_cast<std::size_t>(j)].interference_w[static_cast<std::size_t>(k)]
                    : 0.0;
    o.prev_interference.push_back(detail::normalize_interference(interference, cfg));
  }
  o.aoi = s.aoi_s / cfg.aoi_observation_scale_s();
  o.cam_remaining_frac = s.cam_remaining_bits / cfg.cam_bits();
  o.time_budget_frac = s.time_budget_remaining_s / cfg.time_budget_s();
  return o;
}

inline std::vector<Observation> build_observations(const EnvState& st, const EnvConfig& cfg) {
  std::vector<Observation> out;
  for (int j = 0; j < cfg.num_platoons; ++j) out.push_back(build_observation(j, st, cfg));
  return out;
}

/// Evaluates one slot for already-decoded actions against the current snapshot.
inline StepOutcome evaluate_slot(std::span<const ActionCommand> actions, const ChannelSnapshot& snap,
                                 const EnvConfig& cfg) {
  StepOutcome out;
  for (int j = 0; j < cfg.num_platoons; ++j) {
    PlatoonOutcome po;
    po.action = actions[j];
    auto v2i = compute_v2i_rate(j, actions, snap, cfg);
    po.v2i_rate = v2i.rate;
    po.interference_w = std::move(v2i.interference_w);
    po.v2v_min_rate = compute_v2v_rate(j, actions, snap, cfg);
    po.v2i_success = v2i_succeeded(po.action, po.v2i_rate, cfg);
    out.platoons.push_back(std::move(po));
  }
  return out;
}

struct StepResult {
  StepOutcome outcome;
  std::vector<Observation> observations;  // for the next slot
};

/// Advances one slot. Large-scale fading is refreshed only at epoch
/// boundaries inside an episode; fast fading is redrawn every slot.
inline StepResult step(EnvState& st, std::span<const std::vector<double>> raw_actions, const EnvConfig& cfg,
                       Rng& rng) {
  if (raw_actions.size() != static_cast<std::size_t>(cfg.num_platoons))
    throw DecodeError("step: expected one raw action per platoon");
  std::vector<ActionCommand> actions;
  actions.reserve(raw_actions.size());
  for (const auto& raw : raw_actions) actions.push_back(decode_action(raw, cfg));

  StepResult result;
  result.outcome = evaluate_slot(actions, st.snapshot, cfg);
  for (int j = 0; j < cfg.num_platoons; ++j) {
    auto& s = st.platoons[static_cast<std::size_t>(j)];
    const auto& po = result.outcome.platoons[static_cast<std::size_t>(j)];
    s.aoi_s = update_aoi(s, po, cfg);
    update_cam(s, po, cfg);
  }
  st.previous = result.outcome;
  ++st.slot;
  for (auto& s : st.platoons) detail::advance_platoon(s, cfg, rng);
  if (st.slot % cfg.large_scale_epoch_slots == 0 && st.slot < cfg.episode_slots)
    detail::draw_large_scale(st, cfg, rng, false);
  detail::draw_fast_fading(st, cfg, rng);
  result.observations = build_observations(st, cfg);
  return result;
}

}  // namespace platoon_marl
