#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "platoon_marl/reward.hpp"
#include "support/oracles.hpp"

using namespace platoon_marl;
using namespace platoon_marl::reward;

using oracle::random_inputs;
using oracle::random_weights;

TEST(StepG, Plateau) {
  EXPECT_EQ(step_g(0.0, 1.5), 1.5);
  EXPECT_EQ(step_g(-0.1, 1.5), 0.0);
  EXPECT_EQ(step_g(1e9, 1.5), 1.5);
  for (double x : {-3.0, -1e-9, 1e-9, 7.0})
    for (double s : {0.5, 2.0, 1e6}) EXPECT_EQ(step_g(x, 1.0), step_g(s * x, 1.0));
}

TEST(PowerPenalty, Linear) {
  EXPECT_EQ(power_penalty_f(0.0, 2.0), 0.0);
  EXPECT_EQ(power_penalty_f(2.0, 2.0), 1.0);
  EXPECT_EQ(power_penalty_f(1.0, 2.0), 0.5);
  EXPECT_THROW(power_penalty_f(2.5, 2.0), DomainError);
  EXPECT_THROW(power_penalty_f(-0.1, 2.0), DomainError);
}

TEST(LocalReward, Examples) {
  RewardWeights w;
  w.kappa1 = w.kappa2 = w.kappa3 = w.kappa4 = 1.0;
  w.revenue = 1.0;
  LocalInputs in;
  in.cam_remaining_frac = 1.0;
  in.aoi_s = 0.001;
  in.v2i_rate = 1.0;
  in.min_v2i_rate = 3.0;
  in.power_w = 0.0;
  EXPECT_DOUBLE_EQ(local_reward(in, w), -1.0 - 0.001);

  in.cam_remaining_frac = 0.0;
  in.v2i_rate = 3.0;
  in.aoi_s = 0.007;
  w.kappa2 = 5.0;
  w.kappa3 = 2.0;
  EXPECT_DOUBLE_EQ(local_reward(in, w), -5.0 * 0.007 + 2.0 * 1.0);
}

TEST(TaskRewards, PowerPenaltyFollowsMode) {
  RewardWeights w;
  LocalInputs in;
  in.power_w = 0.5;
  in.max_power_w = 1.0;
  in.mode = 1;
  auto with = task_rewards(in, w);
  in.power_w = 0.0;
  auto without = task_rewards(in, w);
  EXPECT_DOUBLE_EQ(with.cam - without.cam, -w.kappa4 * 0.5);
  EXPECT_EQ(with.aoi, without.aoi);

  in.mode = 0;
  in.power_w = 0.5;
  with = task_rewards(in, w);
  in.power_w = 0.0;
  without = task_rewards(in, w);
  EXPECT_EQ(with.cam, without.cam);
  EXPECT_DOUBLE_EQ(with.aoi - without.aoi, -w.kappa4 * 0.5);
}

TEST(TaskRewards, SumIsLocalRewardBitExact) {
  Rng rng = make_rng(1);
  for (int n = 0; n < 10000; ++n) {
    const auto in = random_inputs(rng);
    const auto w = random_weights(rng);
    const auto t = task_rewards(in, w);
    ASSERT_EQ(t.cam + t.aoi, local_reward(in, w)) << "sample " << n;
  }
}

TEST(LocalReward, MonotoneInRemainingAgeAndPower) {
  Rng rng = make_rng(2);
  for (int n = 0; n < 2000; ++n) {
    const auto in = random_inputs(rng);
    const auto w = random_weights(rng);
    const double base = local_reward(in, w);
    auto more_cam = in;
    more_cam.cam_remaining_frac = std::min(1.0, in.cam_remaining_frac + 0.1);
    ASSERT_LE(local_reward(more_cam, w), base);
    auto older = in;
    older.aoi_s += 0.001;
    ASSERT_LE(local_reward(older, w), base);
    auto louder = in;
    louder.power_w = std::min(1.0, in.power_w + 0.1);
    ASSERT_LE(local_reward(louder, w), base);
    ASSERT_TRUE(std::isfinite(base));
  }
}

TEST(GlobalReward, FloorAndUnitCases) {
  const double noise = 1e-14;
  const std::vector<std::vector<double>> zero{{0.0, 0.0, 0.0}};
  EXPECT_DOUBLE_EQ(global_reward_raw(zero, noise), -3.0 * std::log10(noise));
  const std::vector<std::vector<double>> unit{{1.0 - noise}};
  EXPECT_NEAR(global_reward_raw(unit, noise), 0.0, 1e-15);
}

TEST(GlobalReward, DoublingInterference) {
  const double noise = 1e-14;
  Rng rng = make_rng(9);
  std::vector<std::vector<double>> i(2, std::vector<double>(3));
  for (auto& r : i)
    for (auto& x : r) x = std::pow(10.0, uniform(rng, -6.0, -3.0));
  auto doubled = i;
  for (auto& r : doubled)
    for (auto& x : r) x *= 2.0;
  // Per platoon mean of K terms, so the change is K log10(2).
  EXPECT_NEAR(global_reward_raw(i, noise) - global_reward_raw(doubled, noise), 3.0 * std::log10(2.0), 1e-6);
}

TEST(GlobalReward, NonIncreasingInInterference) {
  const double noise = 1e-14;
  Rng rng = make_rng(10);
  for (int n = 0; n < 1000; ++n) {
    std::vector<std::vector<double>> i(3, std::vector<double>(2));
    for (auto& r : i)
      for (auto& x : r) x = uniform(rng, 0.0, 1e-9);
    const double base = global_reward_raw(i, noise);
    auto more = i;
    more[n % 3][n % 2] += uniform(rng, 0.0, 1e-9);
    ASSERT_LE(global_reward_raw(more, noise), base);
  }
  const std::vector<std::vector<double>> bad{{-1.0}};
  EXPECT_THROW(global_reward_raw(bad, noise), DomainError);
}

TEST(GlobalReward, Normalization) {
  RewardWeights w;
  const std::vector<std::vector<double>> i{{1e-10, 0.0}, {0.0, 0.0}};
  const double raw = global_reward_raw(i, 1e-14);
  EXPECT_DOUBLE_EQ(global_reward(i, 2, 1e-14, w), (raw / 2 - w.global_norm_offset) / w.global_norm_scale);
}

TEST(ComputeRewards, BundleFromSlot) {
  EnvConfig c;
  c.num_platoons = 2;
  c.followers_per_platoon = 2;
  c.num_subchannels = 2;
  Rng rng = make_rng(3);
  auto st = init_episode(c, rng);
  const std::vector<std::vector<double>> raw{{1.0, -1.0, -1.0, 1.0}, {-1.0, 1.0, 1.0, 0.0}};
  const auto r = step(st, raw, c, rng);
  const RewardWeights w;
  const auto b = compute_rewards(st, r.outcome, c, w);
  ASSERT_EQ(b.local.size(), 2u);
  for (int j = 0; j < 2; ++j) {
    EXPECT_EQ(b.task1[j] + b.task2[j], b.local[j]);
    const auto in = make_inputs(st.platoons[j], r.outcome.platoons[j], c);
    EXPECT_EQ(in.mode, j == 0 ? 0 : 1);
    EXPECT_EQ(b.local[j], local_reward(in, w));
  }
  std::vector<std::vector<double>> i{r.outcome.platoons[0].interference_w, r.outcome.platoons[1].interference_w};
  EXPECT_EQ(b.global, global_reward(i, 2, c.noise_power_w(), w));
}
