#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "platoon_marl/experiment.hpp"

using namespace platoon_marl;
using namespace platoon_marl::experiment;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_sweep(const fs::path& out) {
  ExperimentConfig c;
  c.env.num_platoons = 2;
  c.env.num_subchannels = 2;
  c.env.episode_slots = 10;
  c.train.episodes = 3;
  c.train.minibatch = 8;
  c.train.buffer_capacity = 100;
  c.train.actor_hidden = {4};
  c.train.local_critic_hidden = {4};
  c.train.global_critic_hidden = {4};
  c.sweep_gaps_m = {5, 15, 25, 35};
  c.sweep_platoon_sizes = {2};
  c.sweep_algorithms = {Algorithm::tdec, Algorithm::random};
  c.seeds = {1, 2, 3};
  c.output_dir = out.string();
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// A synthetic metrics table for one seed of a sweep point with P platoons.
struct Row {
  double aoi_s = 0.001;
  double team = 0.0;
  std::vector<int> cam{1, 1};
};

metrics::Table synthetic(const std::string& algo, double gap, int size, std::uint64_t seed,
                         const std::vector<Row>& rows) {
  metrics::Table t;
  const int p = static_cast<int>(rows.front().cam.size());
  t.metadata = {{"algorithm", algo}, {"gap_m", format_gap(gap)}, {"platoon_size", std::to_string(size)},
                {"seed", std::to_string(seed)}};
  t.columns = metrics::columns_for(p, false);
  for (std::size_t e = 0; e < rows.size(); ++e) {
    std::vector<double> v(t.columns.size(), 0.0);
    v[t.column("episode")] = static_cast<double>(e);
    v[t.column("mean_aoi_s")] = rows[e].aoi_s;
    v[t.column("team_reward")] = rows[e].team;
    v[t.column("mean_local_reward")] = rows[e].team;
    const auto cams = t.indexed_columns("cam_delivered_");
    for (int j = 0; j < p; ++j) v[cams[static_cast<std::size_t>(j)]] = rows[e].cam[static_cast<std::size_t>(j)];
    t.rows.push_back(v);
  }
  return t;
}

}  // namespace

TEST(Plan, CartesianProductAndNames) {
  const auto cfg = tiny_sweep("x");
  const auto plan = plan_sweep(cfg);
  EXPECT_EQ(plan.size(), 24u);
  std::vector<std::string> names;
  for (const auto& s : plan) names.push_back(s.file_name());
  std::sort(names.begin(), names.end());
  EXPECT_EQ(std::unique(names.begin(), names.end()), names.end());
  EXPECT_EQ((RunSpec{Algorithm::modified, 12.5, 4, 7}.file_name()), "modified_gap12.5_size4_seed7.csv");
  EXPECT_EQ(format_gap(25.0), "25");
}

TEST(Plan, PointConfigAndSingleRun) {
  ExperimentConfig cfg;
  const auto c = point_config(cfg, {Algorithm::ddpg, 10.0, 3, 5});
  EXPECT_EQ(c.env.intra_platoon_gap_m, 10.0);
  EXPECT_EQ(c.env.followers_per_platoon, 2);
  EXPECT_EQ(c.train.algorithm, Algorithm::ddpg);
  const auto s = single_run(cfg, 9);
  EXPECT_EQ(s.platoon_size, cfg.env.followers_per_platoon + 1);
  EXPECT_EQ(s.gap_m, cfg.env.intra_platoon_gap_m);
  EXPECT_EQ(s.seed, 9u);
}

TEST(Sweep, WritesEveryPointSkipsExistingAndReproduces) {
  const auto dir = fresh_dir("platoon_marl_sweep");
  const auto cfg = tiny_sweep(dir);
  const auto first = run_sweep(cfg, 2);
  EXPECT_TRUE(first.failures.empty());
  EXPECT_EQ(first.written.size(), 24u);
  EXPECT_EQ(metrics_files(dir).size(), 24u);
  for (const auto& e : fs::directory_iterator(dir)) EXPECT_NE(e.path().extension(), ".tmp");

  const auto name = RunSpec{Algorithm::tdec, 15, 2, 2}.file_name();
  const auto original = slurp(dir / name);
  const auto t = metrics::load_table((dir / name).string());
  EXPECT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.meta("gap_m"), "15");
  EXPECT_EQ(t.meta("platoon_size"), "2");

  const auto again = run_sweep(cfg, 1);
  EXPECT_EQ(again.skipped.size(), 24u);
  EXPECT_TRUE(again.written.empty());

  fs::remove(dir / name);
  const auto refill = run_sweep(cfg, 1);
  ASSERT_EQ(refill.written, std::vector<std::string>{name});
  EXPECT_EQ(slurp(dir / name), original);
  fs::remove_all(dir);
}

TEST(Sweep, FailuresAreReportedPerRun) {
  const auto dir = fresh_dir("platoon_marl_sweep_fail");
  auto cfg = tiny_sweep(dir);
  cfg.sweep_gaps_m = {5};
  cfg.seeds = {1};
  fs::create_directories(dir);
  // A directory squatting on the temporary name makes that one write fail.
  fs::create_directories(dir / (RunSpec{Algorithm::random, 5, 2, 1}.file_name() + ".tmp") / "x");
  const auto r = run_sweep(cfg, 1);
  EXPECT_EQ(r.written.size(), 1u);
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].file, (RunSpec{Algorithm::random, 5, 2, 1}.file_name()));
  fs::remove_all(dir);
}

TEST(RunPoint, SameConfigAndSeedIsByteIdentical) {
  const auto cfg = tiny_sweep("unused");
  const RunSpec spec{Algorithm::tdec, 25, 2, 4};
  std::ostringstream a, b;
  metrics::write_table(a, run_point(cfg, spec));
  metrics::write_table(b, run_point(cfg, spec));
  EXPECT_EQ(a.str(), b.str());
  std::ostringstream c;
  metrics::write_table(c, run_point(cfg, {Algorithm::tdec, 25, 2, 5}));
  EXPECT_NE(a.str(), c.str());
}

TEST(RunPoint, SavesNetworks) {
  const auto dir = fresh_dir("platoon_marl_nets");
  run_point(tiny_sweep("unused"), {Algorithm::tdec, 25, 2, 1}, {}, dir);
  EXPECT_FALSE(fs::is_empty(dir));
  fs::remove_all(dir);
}

TEST(Aggregate, ConstantAoi) {
  const std::vector<Row> rows(10, Row{0.001, 0.0, {1, 1}});
  const auto s = aggregate({synthetic("tdec", 25, 4, 1, rows)});
  ASSERT_EQ(s.points.size(), 1u);
  EXPECT_DOUBLE_EQ(s.points[0].mean_aoi_s, 0.001);
  EXPECT_EQ(s.points[0].cam_probability, 1.0);
  EXPECT_EQ(s.points[0].tail_episodes, 2u);
  EXPECT_EQ(s.points[0].team_reward_std, 0.0);
}

TEST(Aggregate, MeansAcrossSeeds) {
  const auto a = synthetic("tdec", 25, 4, 1, std::vector<Row>(5, Row{0.004, 1.0, {1, 0}}));
  const auto b = synthetic("tdec", 25, 4, 2, std::vector<Row>(5, Row{0.006, 3.0, {0, 0}}));
  AggregateOptions opt;
  opt.tail_episodes = 5;
  const auto s = aggregate({a, b}, opt);
  ASSERT_EQ(s.points.size(), 1u);
  const auto& p = s.points[0];
  EXPECT_DOUBLE_EQ(p.mean_aoi_s, 0.005);
  EXPECT_DOUBLE_EQ(p.cam_probability, 0.25);
  EXPECT_DOUBLE_EQ(p.team_reward, 2.0);
  EXPECT_DOUBLE_EQ(p.team_reward_std, std::sqrt(2.0));
  EXPECT_EQ(p.seeds, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_DOUBLE_EQ(p.reward_curve[0], 2.0);
}

TEST(Aggregate, TailWindowOnlyCountsFinalEpisodes) {
  std::vector<Row> rows(10, Row{0.009, -5.0, {0, 0}});
  for (int e = 7; e < 10; ++e) rows[static_cast<std::size_t>(e)] = Row{0.002, 1.0, {1, 1}};
  AggregateOptions opt;
  opt.tail_episodes = 3;
  const auto s = aggregate({synthetic("tdec", 5, 4, 1, rows)}, opt);
  EXPECT_DOUBLE_EQ(s.points[0].mean_aoi_s, 0.002);
  EXPECT_EQ(s.points[0].cam_probability, 1.0);
  opt.tail_episodes = 11;
  EXPECT_THROW(aggregate({synthetic("tdec", 5, 4, 1, rows)}, opt), metrics::MetricsError);
  opt.tail_episodes = 0;
  EXPECT_THROW(aggregate({synthetic("tdec", 5, 4, 1, rows)}, opt), metrics::MetricsError);
  opt.tail_episodes.reset();
  opt.tail_fraction = 0.25;  // ceil(2.5) = 3
  EXPECT_EQ(aggregate({synthetic("tdec", 5, 4, 1, rows)}, opt).points[0].tail_episodes, 3u);
}

TEST(Aggregate, Errors) {
  const std::vector<Row> rows(4);
  EXPECT_THROW(aggregate({synthetic("tdec", 5, 4, 1, rows), synthetic("tdec", 5, 4, 1, rows)}), metrics::MetricsError);
  EXPECT_THROW(aggregate({synthetic("tdec", 5, 4, 1, rows), synthetic("tdec", 5, 4, 2, std::vector<Row>(5))}),
               metrics::MetricsError);
  auto no_meta = synthetic("tdec", 5, 4, 1, rows);
  no_meta.metadata.erase("seed");
  EXPECT_THROW(aggregate({no_meta}), metrics::MetricsError);
  AggregateOptions opt;
  opt.moving_average_window = 0;
  EXPECT_THROW(aggregate({synthetic("tdec", 5, 4, 1, rows)}, opt), metrics::MetricsError);
}

TEST(Aggregate, PermutationInvariantAndWithinHull) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<metrics::Table> tables;
  for (const char* algo : {"tdec", "ddpg"})
    for (double gap : {5.0, 15.0})
      for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        std::vector<Row> rows(20);
        for (auto& r : rows) r = Row{0.001 + 0.01 * u(gen), u(gen) - 0.5, {u(gen) < 0.5, u(gen) < 0.7}};
        tables.push_back(synthetic(algo, gap, 4, seed, rows));
      }
  const auto base = aggregate(tables);
  ASSERT_EQ(base.points.size(), 4u);
  for (int n = 0; n < 5; ++n) {
    std::shuffle(tables.begin(), tables.end(), gen);
    const auto s = aggregate(tables);
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      EXPECT_EQ(s.points[i].mean_aoi_s, base.points[i].mean_aoi_s);
      EXPECT_EQ(s.points[i].reward_curve, base.points[i].reward_curve);
    }
  }
  for (const auto& p : base.points) {
    const auto [lo, hi] = std::minmax_element(p.seed_aoi_s.begin(), p.seed_aoi_s.end());
    EXPECT_GE(p.mean_aoi_s, *lo);
    EXPECT_LE(p.mean_aoi_s, *hi);
    EXPECT_GE(p.cam_probability, 0.0);
    EXPECT_LE(p.cam_probability, 1.0);
  }
}

TEST(Aggregate, MovingAverageIsTrailing) {
  EXPECT_EQ(moving_average({1, 2, 3, 4}, 2), (std::vector<double>{1, 1.5, 2.5, 3.5}));
  EXPECT_EQ(moving_average({1, 2, 3}, 1), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(sample_std({5.0}), 0.0);
}

TEST(Export, PlotFilesWithUnits) {
  std::vector<metrics::Table> tables;
  for (double gap : {5.0, 15.0, 25.0, 35.0})
    for (std::uint64_t seed = 1; seed <= 2; ++seed)
      tables.push_back(synthetic("tdec", gap, 4, seed, std::vector<Row>(6, Row{0.002 * seed, 0.5, {1, 0}})));
  const auto dir = fresh_dir("platoon_marl_plots");
  const auto files = export_plot_data(aggregate(tables), dir);
  ASSERT_EQ(files.size(), plot_files().size());
  for (const auto& f : files) EXPECT_EQ(slurp(f).rfind("# units: ", 0), 0u) << f;

  std::istringstream aoi(slurp(dir / "aoi_vs_gap.csv"));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(aoi, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 6u);  // units, header, 4 gaps
  EXPECT_EQ(lines[1], "algorithm,gap_m,platoon_size,seeds,mean_aoi_ms,std_aoi_ms");
  EXPECT_EQ(lines[2].substr(0, 20), "tdec,5,4,2,3,1.41421");
  EXPECT_EQ(lines[5].substr(0, 10), "tdec,35,4,");

  std::istringstream rew(slurp(dir / "reward_vs_episode.csv"));
  int rows = -2;
  while (std::getline(rew, line)) ++rows;
  EXPECT_EQ(rows, 4 * 6);
  fs::remove_all(dir);
}
