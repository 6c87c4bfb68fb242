#include "matchdb/cube.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

#include "matchdb/error.hpp"
#include "matchdb/grouping.hpp"

namespace matchdb {

namespace {

std::set<std::string> as_set(std::span<const std::string> v) { return {v.begin(), v.end()}; }

Cuboid from_base(const Table& table, const std::vector<std::string>& covariates,
                 std::span<const std::string> treatments) {
  Grouping g = group_by(table, covariates);
  Cuboid c;
  c.covariates = covariates;
  c.cells = g.groups;
  c.keys.assign(covariates.size(), std::vector<double>(g.groups));
  c.count.assign(g.groups, 0);
  c.max_id.assign(g.groups, std::numeric_limits<std::int64_t>::min());
  c.min_t.assign(treatments.size(), std::vector<double>(g.groups, std::numeric_limits<double>::infinity()));
  c.max_t.assign(treatments.size(), std::vector<double>(g.groups, -std::numeric_limits<double>::infinity()));
  std::vector<std::span<const double>> key_cols, t_cols;
  for (const auto& k : covariates) key_cols.push_back(table.values(k));
  for (const auto& t : treatments) t_cols.push_back(table.values(t));
  auto ids = table.ids();
  const std::size_t nt = t_cols.size();
  if (nt <= 64) {
    // Treatments are binary, so one cache line per cell holding presence
    // bitmasks replaces per-treatment min / max updates.
    struct Agg {
      std::int64_t count = 0;
      std::int64_t max_id = std::numeric_limits<std::int64_t>::min();
      std::uint64_t treated = 0;
      std::uint64_t control = 0;
    };
    std::vector<Agg> agg(g.groups);
    const std::uint64_t all_bits = nt == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << nt) - 1;
    for (std::size_t r = 0; r < g.group_of.size(); ++r) {
      auto cell = g.group_of[r];
      auto& a = agg[cell];
      if (a.count++ == 0)
        for (std::size_t d = 0; d < key_cols.size(); ++d) c.keys[d][cell] = key_cols[d][r] == 0.0 ? 0.0 : key_cols[d][r];
      a.max_id = std::max(a.max_id, ids[r]);
      std::uint64_t bits = 0;
      for (std::size_t t = 0; t < nt; ++t) bits |= std::uint64_t{t_cols[t][r] == 1.0} << t;
      a.treated |= bits;
      a.control |= ~bits & all_bits;
    }
    for (std::size_t cell = 0; cell < g.groups; ++cell) {
      c.count[cell] = agg[cell].count;
      c.max_id[cell] = agg[cell].max_id;
      for (std::size_t t = 0; t < nt; ++t) {
        c.min_t[t][cell] = (agg[cell].control >> t) & 1 ? 0.0 : 1.0;
        c.max_t[t][cell] = (agg[cell].treated >> t) & 1 ? 1.0 : 0.0;
      }
    }
  } else {
    for (std::size_t r = 0; r < g.group_of.size(); ++r) {
      auto cell = g.group_of[r];
      if (c.count[cell]++ == 0)
        for (std::size_t d = 0; d < key_cols.size(); ++d) c.keys[d][cell] = key_cols[d][r] == 0.0 ? 0.0 : key_cols[d][r];
      c.max_id[cell] = std::max(c.max_id[cell], ids[r]);
      for (std::size_t t = 0; t < nt; ++t) {
        c.min_t[t][cell] = std::min(c.min_t[t][cell], t_cols[t][r]);
        c.max_t[t][cell] = std::max(c.max_t[t][cell], t_cols[t][r]);
      }
    }
  }
  c.cell_of_row = std::move(g.group_of);
  return c;
}

Cuboid from_parent(const Cuboid& parent, const std::vector<std::string>& covariates) {
  std::vector<std::span<const double>> key_cols;
  for (const auto& k : covariates) {
    auto it = std::ranges::find(parent.covariates, k);
    key_cols.push_back(parent.keys[static_cast<std::size_t>(it - parent.covariates.begin())]);
  }
  Grouping g = group_by(key_cols, parent.cells);
  const std::size_t nt = parent.min_t.size();
  Cuboid c;
  c.covariates = covariates;
  c.cells = g.groups;
  c.keys.assign(covariates.size(), std::vector<double>(g.groups));
  c.count.assign(g.groups, 0);
  c.max_id.assign(g.groups, std::numeric_limits<std::int64_t>::min());
  c.min_t.assign(nt, std::vector<double>(g.groups, std::numeric_limits<double>::infinity()));
  c.max_t.assign(nt, std::vector<double>(g.groups, -std::numeric_limits<double>::infinity()));
  std::vector<std::uint8_t> seen(g.groups, 0);
  for (std::size_t p = 0; p < parent.cells; ++p) {
    auto cell = g.group_of[p];
    if (!seen[cell]) {
      seen[cell] = 1;
      for (std::size_t d = 0; d < key_cols.size(); ++d) c.keys[d][cell] = key_cols[d][p];
    }
    c.count[cell] += parent.count[p];
    c.max_id[cell] = std::max(c.max_id[cell], parent.max_id[p]);
  }
  // One sequential pass per treatment over the parent cells.
  for (std::size_t t = 0; t < nt; ++t) {
    auto& lo = c.min_t[t];
    auto& hi = c.max_t[t];
    const auto& plo = parent.min_t[t];
    const auto& phi = parent.max_t[t];
    for (std::size_t p = 0; p < parent.cells; ++p) {
      auto cell = g.group_of[p];
      lo[cell] = std::min(lo[cell], plo[p]);
      hi[cell] = std::max(hi[cell], phi[p]);
    }
  }
  if (!parent.cell_of_row.empty()) {
    c.cell_of_row.resize(parent.cell_of_row.size());
    for (std::size_t r = 0; r < parent.cell_of_row.size(); ++r) c.cell_of_row[r] = g.group_of[parent.cell_of_row[r]];
  }
  return c;
}

// Semi-join of base rows against a cuboid's cell keys.
std::vector<std::uint32_t> index_rows(const Cuboid& c, const Table& base) {
  const std::size_t rows = base.rows();
  std::vector<std::vector<double>> joint(c.covariates.size());
  std::vector<std::span<const double>> spans;
  for (std::size_t d = 0; d < c.covariates.size(); ++d) {
    auto col = base.values(c.covariates[d]);
    joint[d].reserve(c.cells + rows);
    joint[d].insert(joint[d].end(), c.keys[d].begin(), c.keys[d].end());
    joint[d].insert(joint[d].end(), col.begin(), col.end());
    spans.push_back(joint[d]);
  }
  Grouping g = group_by(spans, c.cells + rows);
  // Cells are distinct, so the first c.cells group ids are 0..cells-1 in order.
  std::vector<std::uint32_t> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto grp = g.group_of[c.cells + r];
    if (grp >= c.cells) throw DataError("base row " + std::to_string(r) + " falls outside every cuboid cell");
    out[r] = grp;
  }
  return out;
}

}  // namespace

const Cuboid* CuboidLattice::find(std::span<const std::string> covariates) const {
  auto want = as_set(covariates);
  for (const auto& c : cuboids)
    if (as_set(c.covariates) == want) return &c;
  return nullptr;
}

std::size_t CuboidLattice::treatment_index(std::string_view treatment) const {
  auto it = std::ranges::find(treatments, treatment);
  if (it == treatments.end()) throw ArgumentError("treatment '" + std::string(treatment) + "' is not in the lattice");
  return static_cast<std::size_t>(it - treatments.begin());
}

void CuboidLattice::attach(const Table& base) {
  if (base.rows() != base_rows)
    throw ArgumentError("lattice was built over " + std::to_string(base_rows) + " rows, table has " +
                        std::to_string(base.rows()));
  for (auto& c : cuboids) c.cell_of_row = index_rows(c, base);
}

CuboidLattice materialize_cuboids(const Table& table, std::span<const std::vector<std::string>> subsets,
                                  std::span<const std::string> treatments) {
  CuboidLattice lattice;
  lattice.treatments.assign(treatments.begin(), treatments.end());
  lattice.base_rows = table.rows();
  for (const auto& t : treatments)
    if (table.column(t).kind != ColumnKind::Binary) throw ColumnError("treatment '" + t + "' is not binary");

  std::vector<std::vector<std::string>> distinct;
  for (const auto& s : subsets) {
    std::vector<std::string> dedup;
    for (const auto& c : s)
      if (std::ranges::find(dedup, c) == dedup.end()) dedup.push_back(c);
    bool known = std::ranges::any_of(distinct, [&](const auto& d) { return as_set(d) == as_set(dedup); });
    if (!known) distinct.push_back(std::move(dedup));
  }
  std::vector<std::size_t> order(distinct.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return distinct[a].size() > distinct[b].size(); });

  for (auto idx : order) {
    const auto& covs = distinct[idx];
    auto want = as_set(covs);
    int best = -1;
    for (std::size_t i = 0; i < lattice.cuboids.size(); ++i) {
      auto have = as_set(lattice.cuboids[i].covariates);
      if (have.size() <= want.size() || !std::ranges::includes(have, want)) continue;
      if (best < 0 || lattice.cuboids[i].cells < lattice.cuboids[static_cast<std::size_t>(best)].cells)
        best = static_cast<int>(i);
    }
    if (best < 0) {
      lattice.cuboids.push_back(from_base(table, covs, treatments));
      ++lattice.base_group_bys;
    } else {
      Cuboid c = from_parent(lattice.cuboids[static_cast<std::size_t>(best)], covs);
      c.source = best;
      lattice.cuboids.push_back(std::move(c));
      ++lattice.cuboid_group_bys;
    }
  }
  return lattice;
}

SubclassifiedTable cem_from_cube(const CuboidLattice& lattice, std::span<const std::string> covariates,
                                 std::string_view treatment, const Table& table) {
  const Cuboid* c = lattice.find(covariates);
  if (!c) {
    std::string names;
    for (const auto& s : covariates) names += (names.empty() ? "" : ",") + s;
    throw ArgumentError("covariate set {" + names + "} is not materialized in the lattice");
  }
  if (table.rows() != lattice.base_rows)
    throw ArgumentError("table does not match the lattice's base table");
  auto t = lattice.treatment_index(treatment);
  std::vector<std::uint32_t> local;
  std::span<const std::uint32_t> cell_of_row = c->cell_of_row;
  if (cell_of_row.size() != table.rows()) {
    local = index_rows(*c, table);
    cell_of_row = local;
  }
  std::vector<std::uint8_t> keep(c->cells);
  for (std::size_t i = 0; i < c->cells; ++i) keep[i] = c->min_t[t][i] != c->max_t[t][i];
  std::vector<std::size_t> rows;
  std::vector<std::int64_t> subclass;
  for (std::size_t r = 0; r < cell_of_row.size(); ++r) {
    if (!keep[cell_of_row[r]]) continue;
    rows.push_back(r);
    subclass.push_back(c->max_id[cell_of_row[r]]);
  }
  return SubclassifiedTable{table.take(rows), std::move(subclass), std::string(treatment)};
}

}  // namespace matchdb
