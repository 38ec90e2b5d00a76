#pragma once

// Per-episode metrics files: two comment lines (schema version, run
// metadata), a column header, then one comma-separated row per episode.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "platoon_marl/marl.hpp"

namespace platoon_marl::metrics {

inline constexpr int kSchemaVersion = 1;
inline const std::string kSchemaLine = "# platoon_marl metrics schema_version=1";

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One metrics file in memory.
struct Table {
  std::map<std::string, std::string> metadata;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw MetricsError("metrics: missing column '" + name + "'");
  }
  /// Columns named prefix0, prefix1, ... in index order.
  std::vector<std::size_t> indexed_columns(const std::string& prefix) const {
    std::vector<std::size_t> out;
    for (int j = 0;; ++j) {
      const auto name = prefix + std::to_string(j);
      std::size_t i = 0;
      while (i < columns.size() && columns[i] != name) ++i;
      if (i == columns.size()) break;
      out.push_back(i);
    }
    return out;
  }
  const std::string& meta(const std::string& key) const {
    auto it = metadata.find(key);
    if (it == metadata.end()) throw MetricsError("metrics: missing metadata '" + key + "'");
    return it->second;
  }
  bool operator==(const Table&) const = default;
};

inline std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Column layout for P platoons.
inline std::vector<std::string> columns_for(int platoons, bool wall_clock) {
  std::vector<std::string> c{"episode"};
  for (const char* prefix : {"local_reward_", "task1_reward_", "task2_reward_"})
    for (int j = 0; j < platoons; ++j) c.push_back(prefix + std::to_string(j));
  c.insert(c.end(), {"global_reward", "mean_local_reward", "team_reward", "mean_aoi_s"});
  for (int j = 0; j < platoons; ++j) c.push_back("cam_delivered_" + std::to_string(j));
  c.push_back("cam_delivery_rate");
  c.push_back("mean_power_w");
  if (wall_clock) c.push_back("wall_clock_s");
  return c;
}

inline std::vector<double> row_for(const marl::EpisodeRecord& r, bool wall_clock) {
  std::vector<double> v{static_cast<double>(r.episode)};
  for (const auto* xs : {&r.local_reward, &r.task1_reward, &r.task2_reward}) v.insert(v.end(), xs->begin(), xs->end());
  const double local = r.mean_local_reward();
  v.insert(v.end(), {r.global_reward, local, local + r.global_reward, r.mean_aoi_s});
  for (int d : r.cam_delivered) v.push_back(d);
  v.push_back(r.cam_delivery_rate());
  v.push_back(r.mean_power_w);
  if (wall_clock) v.push_back(r.wall_clock_s);
  return v;
}

inline Table make_table(const std::vector<marl::EpisodeRecord>& episodes, int platoons,
                        std::map<std::string, std::string> metadata, bool wall_clock = false) {
  Table t;
  t.metadata = std::move(metadata);
  t.columns = columns_for(platoons, wall_clock);
  for (const auto& e : episodes) t.rows.push_back(row_for(e, wall_clock));
  return t;
}

inline void write_table(std::ostream& os, const Table& t) {
  os << kSchemaLine << '\n' << '#';
  for (const auto& [k, v] : t.metadata) {
    if (k.find_first_of(" =\n") != std::string::npos || v.find_first_of(" \n") != std::string::npos)
      throw MetricsError("metrics: metadata must not contain spaces: " + k + "=" + v);
    os << ' ' << k << '=' << v;
  }
  os << '\n';
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  for (const auto& row : t.rows) {
    if (row.size() != t.columns.size()) throw MetricsError("metrics: row width does not match the header");
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_value(row[i]);
    os << '\n';
  }
}

inline Table read_table(std::istream& is, const std::string& origin = "<metrics>") {
  std::string line;
  if (!std::getline(is, line) || line != kSchemaLine)
    throw MetricsError(origin + ": not a metrics file with schema_version=" + std::to_string(kSchemaVersion));
  Table t;
  if (!std::getline(is, line) || line.empty() || line[0] != '#') throw MetricsError(origin + ": missing metadata line");
  std::istringstream meta(line.substr(1));
  std::string kv;
  while (meta >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw MetricsError(origin + ": malformed metadata '" + kv + "'");
    t.metadata[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (!std::getline(is, line) || line.empty()) throw MetricsError(origin + ": missing column header");
  std::istringstream header(line);
  std::string col;
  while (std::getline(header, col, ',')) t.columns.push_back(col);
  int lineno = 3;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || *end != '\0')
        throw MetricsError(origin + ":" + std::to_string(lineno) + ": malformed value '" + cell + "'");
      row.push_back(v);
    }
    if (row.size() != t.columns.size())
      throw MetricsError(origin + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.columns.size()) +
                         " values");
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void save_table(const std::string& path, const Table& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw MetricsError("cannot open metrics file for writing: " + path);
  write_table(os, t);
  os.flush();
  if (!os) throw MetricsError("failed writing metrics file: " + path);
}

inline Table load_table(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MetricsError("cannot open metrics file: " + path);
  return read_table(is, path);
}

}  // namespace platoon_marl::metrics
