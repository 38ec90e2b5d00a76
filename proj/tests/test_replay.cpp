#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "platoon_marl/replay.hpp"

using namespace platoon_marl;

namespace {

Transition tagged(double tag) {
  Transition t;
  t.state = {tag};
  t.global_reward = tag;
  return t;
}

}  // namespace

TEST(ReplayBuffer, EvictsOldestWhenFull) {
  ReplayBuffer buf(50000);
  for (int i = 0; i < 50001; ++i) buffer_push(buf, tagged(i));
  EXPECT_EQ(buf.size(), 50000u);
  EXPECT_EQ(buf.at(0).global_reward, 1.0);
  EXPECT_EQ(buf.at(49999).global_reward, 50000.0);
}

TEST(ReplayBuffer, RingOrderAfterWrap) {
  ReplayBuffer buf(3);
  for (int i = 0; i < 7; ++i) buf.push(tagged(i));
  EXPECT_EQ(buf.at(0).global_reward, 4.0);
  EXPECT_EQ(buf.at(1).global_reward, 5.0);
  EXPECT_EQ(buf.at(2).global_reward, 6.0);
  EXPECT_THROW(buf.at(3), std::out_of_range);
}

TEST(ReplayBuffer, SamplesOnlyStoredTransitions) {
  ReplayBuffer buf(10);
  for (int i = 0; i < 4; ++i) buf.push(tagged(i));
  Rng rng = make_rng(1);
  for (int n = 0; n < 200; ++n) {
    const auto s = buffer_sample(buf, 1, rng);
    ASSERT_EQ(s.size(), 1u);
    ASSERT_GE(s[0]->global_reward, 0.0);
    ASSERT_LE(s[0]->global_reward, 3.0);
  }
}

TEST(ReplayBuffer, SampleErrors) {
  ReplayBuffer buf(10);
  Rng rng = make_rng(1);
  EXPECT_THROW(buffer_sample(buf, 1, rng), std::invalid_argument);
  buf.push(tagged(0));
  EXPECT_THROW(buffer_sample(buf, 2, rng), std::invalid_argument);
  EXPECT_THROW(ReplayBuffer(0), std::invalid_argument);
}

TEST(ReplayBuffer, FullSampleIsPermutation) {
  ReplayBuffer buf(20);
  for (int i = 0; i < 20; ++i) buf.push(tagged(i));
  Rng rng = make_rng(2);
  auto idx = buf.sample_indices(20, rng);
  std::sort(idx.begin(), idx.end());
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(idx[i], i);
}

TEST(ReplayBuffer, DistinctWithinMinibatchAndSeeded) {
  ReplayBuffer buf(100);
  for (int i = 0; i < 100; ++i) buf.push(tagged(i));
  Rng a = make_rng(3), b = make_rng(3);
  for (int n = 0; n < 100; ++n) {
    const auto ia = buf.sample_indices(64, a);
    ASSERT_EQ(ia, buf.sample_indices(64, b));
    ASSERT_EQ(std::set<std::size_t>(ia.begin(), ia.end()).size(), 64u);
  }
}

TEST(ReplayBuffer, UniformFrequencies) {
  const std::size_t size = 100, s = 10;
  const int draws = 10000;
  ReplayBuffer buf(size);
  for (std::size_t i = 0; i < size; ++i) buf.push(tagged(static_cast<double>(i)));
  Rng rng = make_rng(4);
  std::vector<int> hits(size, 0);
  for (int n = 0; n < draws; ++n)
    for (auto i : buf.sample_indices(s, rng)) ++hits[i];
  const double p = static_cast<double>(s) / size;
  const double mean = draws * p;
  const double sigma = std::sqrt(draws * p * (1.0 - p));
  for (std::size_t i = 0; i < size; ++i) EXPECT_NEAR(hits[i], mean, 3.0 * sigma + 1.0) << "index " << i;
}
