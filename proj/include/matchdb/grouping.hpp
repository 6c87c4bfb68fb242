#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace matchdb {

class Table;

// Dense group assignment produced by a hash group-by. Groups are numbered
// in order of first appearance, so the numbering is a function of the
// input order alone.
struct Grouping {
  std::vector<std::uint32_t> group_of;  // one entry per row
  std::size_t groups = 0;
};

// Groups rows by exact equality over every key column. With no key columns
// all rows form a single group (when there is at least one row).
Grouping group_by(std::span<const std::span<const double>> keys, std::size_t rows);
Grouping group_by(const Table& table, std::span<const std::string> columns);

// Per-group aggregates used by the overlap filters: max unit id plus the
// min and max of one binary column.
struct OverlapAggregate {
  std::int64_t max_id = 0;
  double min_t = std::numeric_limits<double>::infinity();
  double max_t = -std::numeric_limits<double>::infinity();
  bool overlaps() const { return min_t != max_t; }
};

std::vector<OverlapAggregate> overlap_aggregates(const Grouping& g, std::span<const std::int64_t> ids,
                                                 std::span<const double> treatment);

}  // namespace matchdb
