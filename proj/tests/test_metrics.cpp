#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>

#include "platoon_marl/metrics.hpp"

using namespace platoon_marl;
using namespace platoon_marl::metrics;

namespace {

marl::EpisodeRecord record(int e) {
  marl::EpisodeRecord r;
  r.episode = e;
  r.local_reward = {-1.0 / 3.0, 0.25 * e};
  r.task1_reward = {-0.125, 0.5};
  r.task2_reward = {r.local_reward[0] + 0.125, r.local_reward[1] - 0.5};
  r.global_reward = 0.1 * e;
  r.mean_aoi_s = 0.001 * (e + 1);
  r.cam_delivered = {1, e % 2};
  r.mean_power_w = 0.123456789012345;
  r.wall_clock_s = 1.5;
  return r;
}

std::string write(const Table& t) {
  std::ostringstream os;
  write_table(os, t);
  return os.str();
}

}  // namespace

TEST(Metrics, ColumnsAndDerivedValues) {
  const auto t = make_table({record(0), record(3)}, 2, {{"algorithm", "tdec"}});
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.columns.front(), "episode");
  EXPECT_EQ(t.indexed_columns("cam_delivered_").size(), 2u);
  const auto& row = t.rows[1];
  const double local = (-1.0 / 3.0 + 0.75) / 2.0;
  EXPECT_EQ(row[t.column("mean_local_reward")], local);
  EXPECT_EQ(row[t.column("team_reward")], local + 0.1 * 3);
  EXPECT_EQ(row[t.column("cam_delivery_rate")], 1.0);
  EXPECT_THROW(t.column("nope"), MetricsError);
  EXPECT_EQ(make_table({}, 2, {}, true).columns.back(), "wall_clock_s");
}

TEST(Metrics, RoundTripAtTwelveDigits) {
  const auto t = make_table({record(0), record(1), record(2)}, 2, {{"algorithm", "tdec"}, {"seed", "7"}});
  const auto text = write(t);
  std::istringstream is(text);
  const auto back = read_table(is);
  EXPECT_EQ(back.metadata, t.metadata);
  EXPECT_EQ(back.columns, t.columns);
  ASSERT_EQ(back.rows.size(), t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    for (std::size_t c = 0; c < t.columns.size(); ++c)
      EXPECT_NEAR(back.rows[i][c], t.rows[i][c], 1e-12 * std::max(1.0, std::abs(t.rows[i][c])));
  EXPECT_EQ(write(back), text);
  EXPECT_NE(text.find("0.123456789012\n"), std::string::npos);
  EXPECT_EQ(text.rfind(kSchemaLine, 0), 0u);
}

TEST(Metrics, FormatValue) {
  EXPECT_EQ(format_value(1.0 / 3.0), "0.333333333333");
  EXPECT_EQ(format_value(0.0), "0");
  EXPECT_EQ(format_value(-2.5e-7), "-2.5e-07");
  EXPECT_EQ(format_value(32000.0), "32000");
}

TEST(Metrics, SchemaErrors) {
  auto read = [](const std::string& s) {
    std::istringstream is(s);
    return read_table(is, "m");
  };
  EXPECT_THROW(read(""), MetricsError);
  EXPECT_THROW(read("# platoon_marl metrics schema_version=2\n# a=b\nx\n"), MetricsError);
  EXPECT_THROW(read(kSchemaLine + "\nno hash\nx\n"), MetricsError);
  EXPECT_THROW(read(kSchemaLine + "\n# broken\nx\n"), MetricsError);
  EXPECT_THROW(read(kSchemaLine + "\n# a=b\n"), MetricsError);
  EXPECT_THROW(read(kSchemaLine + "\n# a=b\nx,y\n1\n"), MetricsError);
  EXPECT_THROW(read(kSchemaLine + "\n# a=b\nx\nabc\n"), MetricsError);
  const auto ok = read(kSchemaLine + "\n# a=b\nx,y\n1,2\n\n3,4\n");
  EXPECT_EQ(ok.rows.size(), 2u);
  EXPECT_EQ(ok.meta("a"), "b");
  EXPECT_THROW(ok.meta("c"), MetricsError);

  Table bad;
  bad.metadata["k"] = "has space";
  std::ostringstream os;
  EXPECT_THROW(write_table(os, bad), MetricsError);
  bad.metadata.clear();
  bad.columns = {"a"};
  bad.rows = {{1.0, 2.0}};
  EXPECT_THROW(write_table(os, bad), MetricsError);
}

TEST(Metrics, FilesRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "platoon_marl_metrics.csv").string();
  const auto t = make_table({record(4)}, 2, {{"seed", "1"}});
  save_table(path, t);
  EXPECT_EQ(write(load_table(path)), write(t));
  std::filesystem::remove(path);
  EXPECT_THROW(load_table(path), MetricsError);
}
