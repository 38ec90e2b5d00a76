#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "platoon_marl/config_io.hpp"

using namespace platoon_marl;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text, "cfg");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(ConfigParse, EmptyTextGivesDefaults) {
  const auto cfg = parse_config_text("");
  EXPECT_EQ(cfg, ExperimentConfig{});
  EXPECT_EQ(cfg.env.num_subchannels, 3);
  EXPECT_EQ(cfg.env.num_platoons, 5);
  EXPECT_EQ(cfg.env.episode_slots, 100);
  EXPECT_EQ(cfg.train.minibatch, 64);
  EXPECT_EQ(cfg.train.tau, 0.0005);
  EXPECT_EQ(cfg.train.policy_delay, 2);
  EXPECT_EQ(cfg.train.buffer_capacity, 50000u);
  EXPECT_EQ(parse_config_text("# only a comment\n\n   \n"), ExperimentConfig{});
}

TEST(ConfigParse, ValuesListsAndComments) {
  const auto cfg = parse_config_text(
      "env.num_platoons = 2   # trailing comment\n"
      "train.actor_hidden = 64, 32\n"
      "experiment.gaps_m = 5,10.5\n"
      "experiment.algorithms = tdec, ddpg\n"
      "env.aoi_persists_across_episodes = true\n"
      "train.algorithm = random\n");
  EXPECT_EQ(cfg.env.num_platoons, 2);
  EXPECT_EQ(cfg.train.actor_hidden, (std::vector<int>{64, 32}));
  EXPECT_EQ(cfg.sweep_gaps_m, (std::vector<double>{5.0, 10.5}));
  EXPECT_EQ(cfg.sweep_algorithms, (std::vector<Algorithm>{Algorithm::tdec, Algorithm::ddpg}));
  EXPECT_TRUE(cfg.env.aoi_persists_across_episodes);
  EXPECT_EQ(cfg.train.algorithm, Algorithm::random);
}

TEST(ConfigParse, NegativeGapReportsLine) {
  const auto msg = error_of("env.num_platoons = 2\nenv.intra_platoon_gap_m = -5\n");
  EXPECT_NE(msg.find("cfg:2:"), std::string::npos) << msg;
  EXPECT_NE(msg.find("env.intra_platoon_gap_m"), std::string::npos) << msg;
}

TEST(ConfigParse, Rejections) {
  EXPECT_NE(error_of("env.bogus = 1\n").find("cfg:1: unknown key"), std::string::npos);
  EXPECT_NE(error_of("env.num_platoons = 2\nenv.num_platoons = 3\n").find("cfg:2:"), std::string::npos);
  EXPECT_NE(error_of("env.num_platoons\n").find("cfg:1:"), std::string::npos);
  EXPECT_NE(error_of("env.num_platoons = \n").find("missing value"), std::string::npos);
  EXPECT_NE(error_of("env.num_platoons = 2.5\n").find("integer"), std::string::npos);
  EXPECT_NE(error_of("env.carrier_ghz = fast\n").find("number"), std::string::npos);
  EXPECT_NE(error_of("train.algorithm = maddpg\n"), "");
  EXPECT_NE(error_of("train.tau = 0\n").find("train.tau"), std::string::npos);
  EXPECT_NE(error_of("experiment.seeds = 1, 1\n").find("distinct"), std::string::npos);
  EXPECT_NE(error_of("train.actor_hidden = 4,,4\n"), "");
  EXPECT_NE(error_of("env.followers_per_platoon = 30\nenv.road_half_length_m = 100\n").find("infeasible"),
            std::string::npos);
}

TEST(ConfigParse, SerializeRoundTrip) {
  ExperimentConfig cfg;
  cfg.env.num_platoons = 2;
  cfg.env.intra_platoon_gap_m = 12.345678901234567;
  cfg.env.obs_aoi_scale_s = 0.005;
  cfg.reward.kappa2 = 1000.0;
  cfg.train.algorithm = Algorithm::decentralized;
  cfg.train.actor_hidden = {7, 3};
  cfg.train.discount = 0.1 + 0.2;  // not exactly representable in short decimal
  cfg.sweep_gaps_m = {1.5, 2.5};
  cfg.seeds = {9, 4};
  cfg.output_dir = "out/dir";
  const auto text = serialize_config(cfg);
  EXPECT_EQ(parse_config_text(text), cfg);
  EXPECT_EQ(serialize_config(parse_config_text(text)), text);
  EXPECT_EQ(parse_config_text(serialize_config(ExperimentConfig{})), ExperimentConfig{});
}

TEST(ConfigParse, EveryKeySerializedOnce) {
  const auto keys = config_keys();
  const auto text = serialize_config(ExperimentConfig{});
  for (const auto& k : keys) {
    const auto pos = text.find(k + " = ");
    ASSERT_NE(pos, std::string::npos) << k;
    EXPECT_EQ(text.find("\n" + k + " = ", pos + 1), std::string::npos) << k;
  }
}

TEST(ConfigParse, FileErrorsNamePath) {
  const auto path = std::filesystem::temp_directory_path() / "platoon_marl_bad.cfg";
  std::ofstream(path) << "env.intra_platoon_gap_m = -5\n";
  try {
    parse_config(path.string());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(path.string() + ":1:"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
  EXPECT_THROW(parse_config("/nonexistent/none.cfg"), ConfigError);
}

TEST(ConfigValidate, SweepPointsMustBeFeasible) {
  ExperimentConfig cfg;
  cfg.sweep_platoon_sizes = {1};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ExperimentConfig{};
  cfg.sweep_gaps_m = {400.0};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ExperimentConfig{};
  cfg.tail_fraction = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
