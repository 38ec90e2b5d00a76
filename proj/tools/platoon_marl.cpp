// Command-line front end: train single runs, sweep, aggregate and export.
//
// Exit codes: 0 success, 2 invalid configuration or arguments, 3 runtime failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "platoon_marl.hpp"

namespace pm = platoon_marl;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 2;
constexpr int kRuntime = 3;

struct Overrides {
  std::string config;
  std::optional<std::string> algo;
  std::optional<int> episodes;
  std::optional<std::string> out;
};

pm::ExperimentConfig load(const Overrides& o) {
  pm::ExperimentConfig cfg = o.config.empty() ? pm::ExperimentConfig{} : pm::parse_config(o.config);
  if (o.algo) {
    cfg.train.algorithm = pm::algorithm_from_string(*o.algo);
    cfg.sweep_algorithms = {cfg.train.algorithm};
  }
  if (o.episodes) cfg.train.episodes = *o.episodes;
  if (o.out) cfg.output_dir = *o.out;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "configuration file (defaults when omitted)");
  cmd->add_option("-a,--algo", o.algo, "tdec | modified | decentralized | ddpg | random");
  cmd->add_option("-e,--episodes", o.episodes, "override train.episodes");
  cmd->add_option("-o,--out", o.out, "output directory (overrides experiment.output_dir)");
}

pm::experiment::AggregateOptions aggregate_options(const pm::ExperimentConfig& cfg, std::optional<std::size_t> tail,
                                                   std::optional<double> fraction, std::optional<int> window) {
  pm::experiment::AggregateOptions opt;
  opt.tail_fraction = fraction.value_or(cfg.tail_fraction);
  opt.tail_episodes = tail;
  opt.moving_average_window = window.value_or(cfg.moving_average_window);
  return opt;
}

void print_summary(const pm::experiment::Summary& s) {
  std::printf("%-14s %8s %5s %5s %5s %14s %12s %10s\n", "algorithm", "gap_m", "size", "seeds", "tail", "team_reward",
              "aoi_ms", "cam_prob");
  for (const auto& p : s.points)
    std::printf("%-14s %8g %5d %5zu %5zu %8.4f±%-5.3f %12.4f %10.4f\n", p.key.algorithm.c_str(), p.key.gap_m,
                p.key.platoon_size, p.seeds.size(), p.tail_episodes, p.team_reward, p.team_reward_std,
                1000.0 * p.mean_aoi_s, p.cam_probability);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-platoon C-V2X resource allocation with multi-agent actor-critic learners"};
  app.require_subcommand(1);

  Overrides o;
  std::uint64_t seed = 1;
  std::optional<std::string> save_nets;
  auto* run = app.add_subcommand("run", "train one (config, algorithm, seed) and write its metrics file");
  add_common(run, o);
  run->add_option("-s,--seed", seed, "run seed");
  run->add_option("--save-networks", save_nets, "directory for the trained networks");

  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  auto* sweep = app.add_subcommand("sweep", "train every (gap, size, algorithm, seed) point; existing files are kept");
  add_common(sweep, o);
  sweep->add_option("-j,--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);

  std::string in_dir;
  std::optional<std::size_t> tail;
  std::optional<double> fraction;
  std::optional<int> window;
  std::string plot_dir = "plots";
  auto add_agg = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", o.config, "configuration file for the aggregation defaults");
    cmd->add_option("-i,--in", in_dir, "directory of metrics files")->required();
    cmd->add_option("--tail-episodes", tail, "final episodes averaged per run");
    cmd->add_option("--tail-fraction", fraction, "final fraction of episodes averaged per run");
    cmd->add_option("--window", window, "moving-average window for reward curves");
  };
  auto* agg = app.add_subcommand("aggregate", "summarize a directory of metrics files");
  add_agg(agg);
  auto* exp = app.add_subcommand("export", "write plot-ready data from a directory of metrics files");
  add_agg(exp);
  exp->add_option("-o,--out", plot_dir, "plot data directory");

  auto* show = app.add_subcommand("show-config", "print the fully resolved configuration");
  add_common(show, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    if (*show) {
      std::cout << pm::serialize_config(load(o));
      return kOk;
    }
    if (*run) {
      const auto cfg = load(o);
      const auto spec = pm::experiment::single_run(cfg, seed);
      fs::create_directories(cfg.output_dir);
      const fs::path path = fs::path(cfg.output_dir) / spec.file_name();
      std::optional<fs::path> nets;
      if (save_nets) nets = *save_nets;
      pm::experiment::write_atomically(path, pm::experiment::run_point(cfg, spec, {}, nets));
      std::cout << path.string() << '\n';
      return kOk;
    }
    if (*sweep) {
      const auto cfg = load(o);
      const auto report = pm::experiment::run_sweep(cfg, jobs, [](const std::string& msg) { std::cerr << msg << '\n'; });
      std::cout << "written " << report.written.size() << ", skipped " << report.skipped.size() << ", failed "
                << report.failures.size() << '\n';
      for (const auto& f : report.failures) std::cerr << f.file << ": " << f.message << '\n';
      return report.failures.empty() ? kOk : kRuntime;
    }
    const auto cfg = load(o);
    const auto summary = pm::experiment::aggregate_files(pm::experiment::metrics_files(in_dir),
                                                         aggregate_options(cfg, tail, fraction, window));
    if (*agg) {
      print_summary(summary);
      return kOk;
    }
    for (const auto& p : pm::experiment::export_plot_data(summary, plot_dir)) std::cout << p << '\n';
    return kOk;
  } catch (const pm::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const pm::metrics::MetricsError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}
