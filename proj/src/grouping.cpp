#include "matchdb/grouping.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <unordered_map>

#include "matchdb/parallel.hpp"
#include "matchdb/table.hpp"

namespace matchdb {

namespace {

// Above this many (group, code) combinations the combine step switches
// from a dense lookup array to a hash map.
constexpr std::size_t kDenseLimit = std::size_t{1} << 22;

std::uint64_t key_bits(double v) {
  if (v == 0.0) v = 0.0;  // fold -0.0 into +0.0
  return std::bit_cast<std::uint64_t>(v);
}

Grouping encode_column(std::span<const double> values) {
  Grouping g;
  g.group_of.resize(values.size());
  std::unordered_map<std::uint64_t, std::uint32_t> codes;
  for (std::size_t r = 0; r < values.size(); ++r) {
    auto [it, inserted] = codes.try_emplace(key_bits(values[r]), static_cast<std::uint32_t>(codes.size()));
    g.group_of[r] = it->second;
  }
  g.groups = codes.size();
  return g;
}

void combine(Grouping& acc, const Grouping& col) {
  const std::size_t rows = acc.group_of.size();
  std::uint32_t next = 0;
  if (acc.groups * col.groups <= kDenseLimit) {
    std::vector<std::uint32_t> table(acc.groups * col.groups, UINT32_MAX);
    for (std::size_t r = 0; r < rows; ++r) {
      auto& slot = table[acc.group_of[r] * col.groups + col.group_of[r]];
      if (slot == UINT32_MAX) slot = next++;
      acc.group_of[r] = slot;
    }
  } else {
    std::unordered_map<std::uint64_t, std::uint32_t> table;
    table.reserve(std::min(rows, acc.groups * col.groups));
    for (std::size_t r = 0; r < rows; ++r) {
      std::uint64_t k = (std::uint64_t{acc.group_of[r]} << 32) | col.group_of[r];
      auto [it, inserted] = table.try_emplace(k, next);
      if (inserted) ++next;
      acc.group_of[r] = it->second;
    }
  }
  acc.groups = next;
}

}  // namespace

Grouping group_by(std::span<const std::span<const double>> keys, std::size_t rows) {
  if (keys.empty()) {
    Grouping g;
    g.group_of.assign(rows, 0);
    g.groups = rows > 0 ? 1 : 0;
    return g;
  }
  std::vector<Grouping> encoded(keys.size());
  parallel_for(keys.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) encoded[i] = encode_column(keys[i]);
  }, 1);
  Grouping acc = std::move(encoded[0]);
  for (std::size_t i = 1; i < encoded.size(); ++i) combine(acc, encoded[i]);
  return acc;
}

Grouping group_by(const Table& table, std::span<const std::string> columns) {
  std::vector<std::span<const double>> keys;
  keys.reserve(columns.size());
  for (const auto& c : columns) keys.push_back(table.values(c));
  return group_by(keys, table.rows());
}

std::vector<OverlapAggregate> overlap_aggregates(const Grouping& g, std::span<const std::int64_t> ids,
                                                 std::span<const double> treatment) {
  std::vector<OverlapAggregate> out(g.groups);
  std::vector<std::uint8_t> seen(g.groups, 0);
  for (std::size_t r = 0; r < g.group_of.size(); ++r) {
    auto& a = out[g.group_of[r]];
    auto& s = seen[g.group_of[r]];
    if (!s || ids[r] > a.max_id) a.max_id = ids[r];
    s = 1;
    a.min_t = std::min(a.min_t, treatment[r]);
    a.max_t = std::max(a.max_t, treatment[r]);
  }
  return out;
}

}  // namespace matchdb
