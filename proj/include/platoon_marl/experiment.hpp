#pragma once

// Sweeps over (gap, platoon size, algorithm, seed), aggregation of the
// resulting metrics files, and plot-data export.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "platoon_marl/config.hpp"
#include "platoon_marl/marl.hpp"
#include "platoon_marl/metrics.hpp"

namespace platoon_marl::experiment {

namespace fs = std::filesystem;

inline std::string format_gap(double gap_m) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", gap_m);
  return buf;
}

/// One training run of a sweep.
struct RunSpec {
  Algorithm algorithm = Algorithm::tdec;
  double gap_m = 25.0;
  int platoon_size = 4;  // leader included
  std::uint64_t seed = 1;

  std::string file_name() const {
    return to_string(algorithm) + "_gap" + format_gap(gap_m) + "_size" + std::to_string(platoon_size) + "_seed" +
           std::to_string(seed) + ".csv";
  }
  bool operator==(const RunSpec&) const = default;
};

/// Cartesian product gaps x sizes x algorithms x seeds, in that nesting order.
inline std::vector<RunSpec> plan_sweep(const ExperimentConfig& cfg) {
  std::vector<RunSpec> out;
  for (double g : cfg.sweep_gaps_m)
    for (int n : cfg.sweep_platoon_sizes)
      for (Algorithm a : cfg.sweep_algorithms)
        for (std::uint64_t s : cfg.seeds) out.push_back({a, g, n, s});
  return out;
}

/// The run described by the config's own env / train sections.
inline RunSpec single_run(const ExperimentConfig& cfg, std::uint64_t seed) {
  return {cfg.train.algorithm, cfg.env.intra_platoon_gap_m, cfg.env.followers_per_platoon + 1, seed};
}

inline ExperimentConfig point_config(const ExperimentConfig& cfg, const RunSpec& spec) {
  ExperimentConfig c = cfg;
  c.env.intra_platoon_gap_m = spec.gap_m;
  c.env.followers_per_platoon = spec.platoon_size - 1;
  c.train.algorithm = spec.algorithm;
  return c;
}

inline std::map<std::string, std::string> run_metadata(const ExperimentConfig& c, const RunSpec& spec) {
  return {{"algorithm", to_string(spec.algorithm)},
          {"seed", std::to_string(spec.seed)},
          {"gap_m", format_gap(spec.gap_m)},
          {"platoon_size", std::to_string(spec.platoon_size)},
          {"num_platoons", std::to_string(c.env.num_platoons)},
          {"num_subchannels", std::to_string(c.env.num_subchannels)},
          {"episode_slots", std::to_string(c.env.episode_slots)},
          {"episodes", std::to_string(c.train.episodes)}};
}

/// Trains one run and returns its metrics table. With `networks_dir` the
/// trained networks are saved there as well.
inline metrics::Table run_point(const ExperimentConfig& cfg, const RunSpec& spec,
                                const marl::Trainer::EpisodeCallback& cb = {},
                                const std::optional<fs::path>& networks_dir = std::nullopt,
                                marl::TrainingDiagnostics* diagnostics = nullptr) {
  const ExperimentConfig c = point_config(cfg, spec);
  c.validate();
  marl::Trainer trainer(c.env, c.reward, c.train, spec.seed);
  const auto log = trainer.run(cb);
  if (networks_dir) trainer.save(networks_dir->string());
  if (diagnostics) *diagnostics = log.diagnostics;
  return metrics::make_table(log.episodes, c.env.num_platoons, run_metadata(c, spec), c.record_wall_clock);
}

/// Writes through a temporary file so a crash never leaves a partial file
/// under the final name.
inline void write_atomically(const fs::path& path, const metrics::Table& t) {
  const fs::path tmp = path.string() + ".tmp";
  metrics::save_table(tmp.string(), t);
  fs::rename(tmp, path);
}

struct RunFailure {
  std::string file;
  std::string message;
};

struct SweepReport {
  std::vector<std::string> written;
  std::vector<std::string> skipped;  // already present, left untouched
  std::vector<RunFailure> failures;
};

/// Runs every sweep point on up to `parallel_runs` threads. Existing output
/// files are skipped; a failing run is reported without stopping the others.
inline SweepReport run_sweep(const ExperimentConfig& cfg, int parallel_runs,
                             const std::function<void(const std::string&)>& progress = {}) {
  cfg.validate();
  const auto plan = plan_sweep(cfg);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  SweepReport report;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < plan.size(); i = next++) {
      const auto& spec = plan[i];
      const auto name = spec.file_name();
      const fs::path path = dir / name;
      if (fs::exists(path)) {
        std::lock_guard lock(mu);
        report.skipped.push_back(name);
        continue;
      }
      try {
        write_atomically(path, run_point(cfg, spec));
        std::lock_guard lock(mu);
        report.written.push_back(name);
        if (progress) progress("wrote " + path.string());
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        report.failures.push_back({name, e.what()});
        if (progress) progress("failed " + name + ": " + e.what());
      }
    }
  };
  const int n = std::max(1, std::min<int>(parallel_runs, static_cast<int>(plan.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::sort(report.written.begin(), report.written.end());
  std::sort(report.skipped.begin(), report.skipped.end());
  std::sort(report.failures.begin(), report.failures.end(),
            [](const RunFailure& a, const RunFailure& b) { return a.file < b.file; });
  return report;
}

// ---------------------------------------------------------------------------
// Aggregation

struct PointKey {
  std::string algorithm;
  double gap_m = 0.0;
  int platoon_size = 0;

  auto operator<=>(const PointKey&) const = default;
};

struct PointSummary {
  PointKey key;
  std::vector<std::uint64_t> seeds;  // ascending
  std::size_t episodes = 0;
  std::size_t tail_episodes = 0;
  // Tail-window statistics, one value per seed (seed order) and their mean.
  std::vector<double> seed_aoi_s, seed_cam_probability, seed_team_reward, seed_local_reward;
  double mean_aoi_s = 0.0;
  double cam_probability = 0.0;
  double team_reward = 0.0;
  double local_reward = 0.0;
  double team_reward_std = 0.0;  // sample std over seeds, 0 for one seed
  // Mean over seeds per episode, and its trailing moving average.
  std::vector<double> reward_curve;
  std::vector<double> reward_curve_ma;
};

struct Summary {
  std::vector<PointSummary> points;  // sorted by key
  int moving_average_window = 1;
};

struct AggregateOptions {
  double tail_fraction = 0.2;
  std::optional<std::size_t> tail_episodes;  // overrides tail_fraction
  int moving_average_window = 10;
};

inline double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

inline double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

inline std::vector<double> moving_average(const std::vector<double>& xs, int window) {
  std::vector<double> out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const std::size_t lo = i + 1 >= static_cast<std::size_t>(window) ? i + 1 - static_cast<std::size_t>(window) : 0;
    double s = 0.0;
    for (std::size_t k = lo; k <= i; ++k) s += xs[k];
    out.push_back(s / static_cast<double>(i - lo + 1));
  }
  return out;
}

/// Number of final episodes a tail window covers for a run of `episodes`.
inline std::size_t tail_length(std::size_t episodes, const AggregateOptions& opt) {
  if (opt.tail_episodes) {
    if (*opt.tail_episodes == 0) throw metrics::MetricsError("aggregate: tail window must be positive");
    if (*opt.tail_episodes > episodes)
      throw metrics::MetricsError("aggregate: tail window of " + std::to_string(*opt.tail_episodes) +
                                  " episodes exceeds the run length of " + std::to_string(episodes));
    return *opt.tail_episodes;
  }
  if (!(opt.tail_fraction > 0.0 && opt.tail_fraction <= 1.0))
    throw metrics::MetricsError("aggregate: tail fraction must lie in (0, 1]");
  if (episodes == 0) throw metrics::MetricsError("aggregate: run has no episodes");
  const auto n = static_cast<std::size_t>(std::ceil(opt.tail_fraction * static_cast<double>(episodes) - 1e-9));
  return std::clamp<std::size_t>(n, 1, episodes);
}

struct TailStats {
  double aoi_s = 0.0;
  double cam_probability = 0.0;  // delivered (episode, platoon) pairs / all pairs
  double team_reward = 0.0;
  double local_reward = 0.0;
};

inline TailStats tail_stats(const metrics::Table& t, std::size_t tail) {
  const auto aoi = t.column("mean_aoi_s");
  const auto team = t.column("team_reward");
  const auto local = t.column("mean_local_reward");
  const auto cams = t.indexed_columns("cam_delivered_");
  if (cams.empty()) throw metrics::MetricsError("metrics: no cam_delivered_<j> columns");
  TailStats s;
  double delivered = 0.0;
  for (std::size_t r = t.rows.size() - tail; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    s.aoi_s += row[aoi];
    s.team_reward += row[team];
    s.local_reward += row[local];
    for (auto c : cams) delivered += row[c];
  }
  const double n = static_cast<double>(tail);
  s.aoi_s /= n;
  s.team_reward /= n;
  s.local_reward /= n;
  s.cam_probability = delivered / (n * static_cast<double>(cams.size()));
  return s;
}

/// Groups tables by sweep point and summarizes them. The result does not
/// depend on the order of `tables`.
inline Summary aggregate(std::vector<metrics::Table> tables, const AggregateOptions& opt = {}) {
  if (opt.moving_average_window < 1) throw metrics::MetricsError("aggregate: moving average window must be >= 1");
  std::map<PointKey, std::vector<std::pair<std::uint64_t, const metrics::Table*>>> groups;
  for (const auto& t : tables) {
    PointKey k{t.meta("algorithm"), std::stod(t.meta("gap_m")), std::stoi(t.meta("platoon_size"))};
    groups[k].push_back({std::stoull(t.meta("seed")), &t});
  }
  Summary out;
  out.moving_average_window = opt.moving_average_window;
  for (auto& [key, runs] : groups) {
    std::sort(runs.begin(), runs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < runs.size(); ++i)
      if (runs[i].first == runs[i - 1].first)
        throw metrics::MetricsError("aggregate: duplicate seed " + std::to_string(runs[i].first) + " for " +
                                    key.algorithm + " gap " + format_gap(key.gap_m));
    PointSummary p;
    p.key = key;
    p.episodes = runs.front().second->rows.size();
    p.tail_episodes = tail_length(p.episodes, opt);
    p.reward_curve.assign(p.episodes, 0.0);
    for (const auto& [seed, t] : runs) {
      if (t->rows.size() != p.episodes)
        throw metrics::MetricsError("aggregate: runs of one sweep point differ in length");
      const auto s = tail_stats(*t, p.tail_episodes);
      p.seeds.push_back(seed);
      p.seed_aoi_s.push_back(s.aoi_s);
      p.seed_cam_probability.push_back(s.cam_probability);
      p.seed_team_reward.push_back(s.team_reward);
      p.seed_local_reward.push_back(s.local_reward);
      const auto team = t->column("team_reward");
      for (std::size_t e = 0; e < p.episodes; ++e) p.reward_curve[e] += t->rows[e][team];
    }
    for (double& r : p.reward_curve) r /= static_cast<double>(runs.size());
    p.reward_curve_ma = moving_average(p.reward_curve, opt.moving_average_window);
    p.mean_aoi_s = mean_of(p.seed_aoi_s);
    p.cam_probability = mean_of(p.seed_cam_probability);
    p.team_reward = mean_of(p.seed_team_reward);
    p.local_reward = mean_of(p.seed_local_reward);
    p.team_reward_std = sample_std(p.seed_team_reward);
    out.points.push_back(std::move(p));
  }
  return out;
}

inline Summary aggregate_files(std::vector<std::string> paths, const AggregateOptions& opt = {}) {
  std::sort(paths.begin(), paths.end());
  std::vector<metrics::Table> tables;
  for (const auto& p : paths) tables.push_back(metrics::load_table(p));
  return aggregate(std::move(tables), opt);
}

/// Every *.csv metrics file directly under `dir`, sorted by name.
inline std::vector<std::string> metrics_files(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Plot data

inline const std::vector<std::string>& plot_files() {
  static const std::vector<std::string> names{"reward_vs_episode.csv", "aoi_vs_gap.csv", "cam_vs_gap.csv",
                                              "aoi_vs_size.csv", "cam_vs_size.csv"};
  return names;
}

/// Writes the five plot-data files into `dir` and returns their paths. Each
/// file starts with a '#' line giving the unit of every column.
inline std::vector<std::string> export_plot_data(const Summary& s, const fs::path& dir) {
  fs::create_directories(dir);
  auto fmt = metrics::format_value;
  auto open = [&](const std::string& name, const std::string& units, const std::string& header) {
    auto os = std::make_unique<std::ofstream>(dir / name, std::ios::binary);
    if (!*os) throw metrics::MetricsError("cannot write plot data: " + (dir / name).string());
    *os << "# units: " << units << '\n' << header << '\n';
    return os;
  };
  std::vector<std::string> written;
  {
    auto os = open(plot_files()[0], "algorithm [-], gap_m [m], platoon_size [vehicles], episode [-], reward [-], reward_ma [-]",
                   "algorithm,gap_m,platoon_size,episode,reward,reward_ma");
    for (const auto& p : s.points)
      for (std::size_t e = 0; e < p.reward_curve.size(); ++e)
        *os << p.key.algorithm << ',' << fmt(p.key.gap_m) << ',' << p.key.platoon_size << ',' << e << ','
            << fmt(p.reward_curve[e]) << ',' << fmt(p.reward_curve_ma[e]) << '\n';
  }
  auto by_gap = s.points;
  std::stable_sort(by_gap.begin(), by_gap.end(), [](const PointSummary& a, const PointSummary& b) {
    return std::tie(a.key.algorithm, a.key.platoon_size, a.key.gap_m) <
           std::tie(b.key.algorithm, b.key.platoon_size, b.key.gap_m);
  });
  auto by_size = s.points;  // already ordered by (algorithm, gap, size)
  const std::string point_units = "algorithm [-], gap_m [m], platoon_size [vehicles], seeds [-], ";
  auto series = [&](const std::string& name, const std::vector<PointSummary>& pts, bool aoi) {
    auto os = open(name,
                   point_units + (aoi ? "mean_aoi_ms [ms], std_aoi_ms [ms]" : "cam_probability [-], std_cam_probability [-]"),
                   std::string("algorithm,gap_m,platoon_size,seeds,") +
                       (aoi ? "mean_aoi_ms,std_aoi_ms" : "cam_probability,std_cam_probability"));
    for (const auto& p : pts) {
      const double scale = aoi ? 1000.0 : 1.0;
      const auto& per_seed = aoi ? p.seed_aoi_s : p.seed_cam_probability;
      *os << p.key.algorithm << ',' << fmt(p.key.gap_m) << ',' << p.key.platoon_size << ',' << p.seeds.size() << ','
          << fmt(scale * (aoi ? p.mean_aoi_s : p.cam_probability)) << ',' << fmt(scale * sample_std(per_seed)) << '\n';
    }
  };
  series(plot_files()[1], by_gap, true);
  series(plot_files()[2], by_gap, false);
  series(plot_files()[3], by_size, true);
  series(plot_files()[4], by_size, false);
  for (const auto& n : plot_files()) written.push_back((dir / n).string());
  return written;
}

}  // namespace platoon_marl::experiment
