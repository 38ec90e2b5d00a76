#pragma once

// Large-scale (path loss + correlated log-normal shadowing) and small-scale
// (Rayleigh) fading for PL->RSU and PL->follower links.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "platoon_marl/errors.hpp"
#include "platoon_marl/rng.hpp"
#include "platoon_marl/units.hpp"

namespace platoon_marl::channel {

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point&) const = default;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

enum class LinkKind { v2i, v2v };

struct LinkGeometry {
  Point tx_position;
  Point rx_position;
  LinkKind link_kind = LinkKind::v2v;
  double antenna_height_tx = 1.5;
  double antenna_height_rx = 1.5;
};

/// Co-located nodes are clamped to this separation before taking logarithms.
inline constexpr double kMinDistanceM = 1.0;

/// V2I path loss 128.1 + 37.6 log10(d[km]).
inline double v2i_pathloss_db(double distance_m) {
  if (!(distance_m > 0.0)) throw DomainError("v2i_pathloss_db: distance must be positive");
  return 128.1 + 37.6 * std::log10(distance_m / 1000.0);
}

/// WINNER B1 LOS below the breakpoint: 22.7 log10(d[m]) + 41.0 + 20 log10(fc[GHz] / 5).
inline double v2v_pathloss_db(double distance_m, double carrier_ghz) {
  if (!(distance_m > 0.0)) throw DomainError("v2v_pathloss_db: distance must be positive");
  if (!(carrier_ghz > 0.0)) throw DomainError("v2v_pathloss_db: carrier must be positive");
  return 22.7 * std::log10(distance_m) + 41.0 + 20.0 * std::log10(carrier_ghz / 5.0);
}

/// Free-space loss, d in meters and fc in GHz. Alternative V2V model for comparisons.
inline double free_space_pathloss_db(double distance_m, double carrier_ghz) {
  if (!(distance_m > 0.0)) throw DomainError("free_space_pathloss_db: distance must be positive");
  if (!(carrier_ghz > 0.0)) throw DomainError("free_space_pathloss_db: carrier must be positive");
  return 20.0 * std::log10(distance_m) + 20.0 * std::log10(carrier_ghz) + 32.44;
}

enum class V2vPathlossModel { winner_b1_los, free_space };

inline std::string to_string(V2vPathlossModel m) {
  return m == V2vPathlossModel::winner_b1_los ? "winner_b1_los" : "free_space";
}

inline V2vPathlossModel v2v_model_from_string(const std::string& s) {
  if (s == "winner_b1_los") return V2vPathlossModel::winner_b1_los;
  if (s == "free_space") return V2vPathlossModel::free_space;
  throw DomainError("unknown V2V path loss model '" + s + "'");
}

inline double v2v_pathloss_db(V2vPathlossModel model, double distance_m, double carrier_ghz) {
  switch (model) {
    case V2vPathlossModel::free_space:
      return free_space_pathloss_db(distance_m, carrier_ghz);
    case V2vPathlossModel::winner_b1_los:
      break;
  }
  return v2v_pathloss_db(distance_m, carrier_ghz);
}

/// Gauss-Markov shadowing update. The marginal stays Normal(0, sigma^2) for any
/// displacement; moved == 0 returns prev_db unchanged.
inline double sample_shadowing(double prev_db, double moved_m, double decorrelation_m,
                               double sigma_db, Rng& rng) {
  if (!(decorrelation_m > 0.0)) throw DomainError("sample_shadowing: decorrelation must be positive");
  if (!(sigma_db > 0.0)) throw DomainError("sample_shadowing: sigma must be positive");
  if (!(moved_m >= 0.0)) throw DomainError("sample_shadowing: displacement must be non-negative");
  if (moved_m == 0.0) return prev_db;
  const double rho = std::exp(-moved_m / decorrelation_m);
  return rho * prev_db + std::sqrt(1.0 - rho * rho) * sigma_db * standard_normal(rng);
}

/// Fresh shadowing draw (infinite displacement).
inline double sample_shadowing(double sigma_db, Rng& rng) {
  if (!(sigma_db > 0.0)) throw DomainError("sample_shadowing: sigma must be positive");
  return sigma_db * standard_normal(rng);
}

/// |x|^2 for x ~ CN(0, 1): exponential with unit mean.
inline double sample_rayleigh_power(Rng& rng) {
  const double re = standard_normal(rng);
  const double im = standard_normal(rng);
  return 0.5 * (re * re + im * im);
}

struct LargeScaleState {
  double pathloss_db = 0.0;
  double shadowing_db = 0.0;
  Point last_position;
  double antenna_gain_db = 0.0;
  double noise_figure_db = 0.0;

  bool operator==(const LargeScaleState&) const = default;

  /// Large-scale power gain (alpha) in linear units.
  double linear_gain() const {
    return units::db_to_linear(-pathloss_db - shadowing_db + antenna_gain_db - noise_figure_db);
  }
};

/// h[k] = alpha * g[k].
inline double compose_gain(const LargeScaleState& large, double fading_power) {
  return large.linear_gain() * fading_power;
}

inline std::vector<double> compose_gain(const LargeScaleState& large, std::span<const double> fading) {
  std::vector<double> out;
  out.reserve(fading.size());
  const double alpha = large.linear_gain();
  for (double g : fading) out.push_back(alpha * g);
  return out;
}

/// Per-link constants needed to refresh a LargeScaleState.
struct LinkParams {
  LinkKind kind = LinkKind::v2v;
  double carrier_ghz = 2.0;
  double shadowing_sigma_db = 3.0;
  double decorrelation_m = 10.0;
  double antenna_gain_db = 6.0;
  double noise_figure_db = 9.0;
  V2vPathlossModel v2v_model = V2vPathlossModel::winner_b1_los;
};

inline double link_pathloss_db(const LinkParams& p, const LinkGeometry& g) {
  const double d = std::max(distance(g.tx_position, g.rx_position), kMinDistanceM);
  if (p.kind == LinkKind::v2i) {
    // 3-D distance for the elevated RSU antenna.
    const double dh = g.antenna_height_tx - g.antenna_height_rx;
    return v2i_pathloss_db(std::max(std::hypot(d, dh), kMinDistanceM));
  }
  return v2v_pathloss_db(p.v2v_model, d, p.carrier_ghz);
}

/// First large-scale draw for a link.
inline LargeScaleState init_large_scale(const LinkParams& p, const LinkGeometry& g, Rng& rng) {
  LargeScaleState s;
  s.pathloss_db = link_pathloss_db(p, g);
  s.shadowing_db = sample_shadowing(p.shadowing_sigma_db, rng);
  s.last_position = g.tx_position;
  s.antenna_gain_db = p.antenna_gain_db;
  s.noise_figure_db = p.noise_figure_db;
  return s;
}

/// Epoch-boundary refresh: shadowing decorrelates against the transmitter's
/// displacement since the previous refresh.
inline void refresh_large_scale(LargeScaleState& s, const LinkParams& p, const LinkGeometry& g,
                                Rng& rng) {
  const double moved = distance(s.last_position, g.tx_position);
  s.pathloss_db = link_pathloss_db(p, g);
  s.shadowing_db = sample_shadowing(s.shadowing_db, moved, p.decorrelation_m, p.shadowing_sigma_db, rng);
  s.last_position = g.tx_position;
}

}  // namespace platoon_marl::channel
