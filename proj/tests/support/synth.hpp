#pragma once

// Seeded synthetic tables for tests and acceptance checks.

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "matchdb/subclass.hpp"
#include "matchdb/table.hpp"

namespace synth {

using matchdb::Column;
using matchdb::Table;

inline std::vector<std::int64_t> iota_ids(std::size_t n, std::int64_t first = 1) {
  std::vector<std::int64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = first + static_cast<std::int64_t>(i);
  return ids;
}

// Integer-valued covariates x1..xd in [0, levels) and binary treatments
// t1..tk with the given treated probability.
inline Table discrete_units(std::mt19937_64& rng, std::size_t n, std::size_t d, int levels, std::size_t k = 1,
                            double p_treated = 0.4) {
  std::uniform_int_distribution<int> lv(0, levels - 1);
  std::bernoulli_distribution bt(p_treated);
  std::vector<Column> cols;
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> v(n);
    for (auto& x : v) x = lv(rng);
    cols.push_back(Column::numeric("x" + std::to_string(j + 1), std::move(v)));
  }
  std::vector<std::string> ts;
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> v(n);
    for (auto& x : v) x = bt(rng) ? 1.0 : 0.0;
    ts.push_back("t" + std::to_string(j + 1));
    cols.push_back(Column::binary(ts.back(), std::move(v)));
  }
  Table t("units", "id", iota_ids(n), std::move(cols));
  return t.with_roles(ts, std::nullopt);
}

inline std::map<std::int64_t, std::int64_t> subclass_map(const matchdb::SubclassifiedTable& s) {
  std::map<std::int64_t, std::int64_t> out;
  auto ids = s.units.ids();
  for (std::size_t r = 0; r < s.rows(); ++r) out[ids[r]] = s.subclass[r];
  return out;
}

// Partition of ids into subclasses, independent of the subclass labels.
inline std::set<std::set<std::int64_t>> partition_of(const std::map<std::int64_t, std::int64_t>& m) {
  std::map<std::int64_t, std::set<std::int64_t>> groups;
  for (const auto& [id, s] : m) groups[s].insert(id);
  std::set<std::set<std::int64_t>> out;
  for (auto& [s, g] : groups) out.insert(std::move(g));
  return out;
}

inline std::map<std::int64_t, double> column_by_id(const Table& t, const std::string& col) {
  std::map<std::int64_t, double> out;
  for (std::size_t r = 0; r < t.rows(); ++r) out[t.ids()[r]] = t.values(col)[r];
  return out;
}

}  // namespace synth
