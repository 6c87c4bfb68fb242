#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "matchdb/subclass.hpp"
#include "matchdb/table.hpp"

namespace matchdb {

// A materialized group-by over one covariate subset. Every cell carries
// the row count, the largest unit id, and min / max of each lattice
// treatment.
struct Cuboid {
  std::vector<std::string> covariates;
  std::size_t cells = 0;
  std::vector<std::vector<double>> keys;  // one column of cell keys per covariate
  std::vector<std::int64_t> count;
  std::vector<std::int64_t> max_id;
  std::vector<std::vector<double>> min_t;  // [treatment][cell]
  std::vector<std::vector<double>> max_t;
  int source = -1;  // index of the cuboid this was aggregated from; -1 = base table
  // Base row -> cell. Empty until attached to a base table.
  std::vector<std::uint32_t> cell_of_row;
};

class CuboidLattice {
 public:
  std::vector<std::string> treatments;
  std::vector<Cuboid> cuboids;
  std::size_t base_rows = 0;
  std::size_t base_group_bys = 0;    // group-bys executed over the base table
  std::size_t cuboid_group_bys = 0;  // group-bys executed over a parent cuboid

  // Cuboid over exactly this covariate set (order-insensitive), or null.
  const Cuboid* find(std::span<const std::string> covariates) const;
  std::size_t treatment_index(std::string_view treatment) const;
  // Rebuilds each cuboid's row -> cell index against `base`.
  void attach(const Table& base);
};

// Materializes one cuboid per distinct subset, largest subsets first. Each
// cuboid is aggregated from the already-materialized strict superset with
// the fewest cells, or from the base table when none exists.
CuboidLattice materialize_cuboids(const Table& table, std::span<const std::vector<std::string>> subsets,
                                  std::span<const std::string> treatments);

// CEM read off a cuboid: cells whose treatment min and max differ are kept,
// and their base rows are recovered through the row index (or a hash
// semi-join if the lattice is not attached).
SubclassifiedTable cem_from_cube(const CuboidLattice& lattice, std::span<const std::string> covariates,
                                 std::string_view treatment, const Table& table);

}  // namespace matchdb
