#include "matchdb/subclass.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_set>

#include "matchdb/error.hpp"
#include "matchdb/grouping.hpp"
#include "matchdb/predicate.hpp"

namespace matchdb {

std::size_t SubclassifiedTable::subclass_count() const {
  std::unordered_set<std::int64_t> s(subclass.begin(), subclass.end());
  return s.size();
}

namespace {

const Column& binary_column(const Table& table, std::string_view name) {
  const auto& c = table.column(name);
  if (c.kind != ColumnKind::Binary) throw ColumnError("treatment '" + std::string(name) + "' is not binary");
  return c;
}

// Keeps rows whose group overlaps; subclass id = label(group).
template <class Label>
SubclassifiedTable keep_overlapping(const Table& table, const Grouping& g, std::span<const OverlapAggregate> agg,
                                    std::string_view treatment, Label label) {
  std::vector<std::size_t> rows;
  std::vector<std::int64_t> subclass;
  for (std::size_t r = 0; r < g.group_of.size(); ++r) {
    auto grp = g.group_of[r];
    if (!agg[grp].overlaps()) continue;
    rows.push_back(r);
    subclass.push_back(label(grp));
  }
  return SubclassifiedTable{table.take(rows), std::move(subclass), std::string(treatment)};
}

}  // namespace

SubclassifiedTable subclassify_ps(const Table& table, int n, std::string_view ps_column) {
  if (n < 1) throw ArgumentError("subclass count must be >= 1");
  const std::size_t rows = table.rows();
  if (static_cast<std::size_t>(n) > rows)
    throw ArgumentError("subclass count " + std::to_string(n) + " exceeds row count " + std::to_string(rows));
  if (!table.has(ps_column)) throw ColumnError("subclassification needs a propensity column '" + std::string(ps_column) + "'");
  const auto& treatment = table.treatment();
  auto t = binary_column(table, treatment).values;
  auto ps = table.values(ps_column);
  auto ids = table.ids();

  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (ps[a] != ps[b]) return ps[a] < ps[b];
    return ids[a] < ids[b];
  });

  Grouping g;
  g.group_of.resize(rows);
  g.groups = static_cast<std::size_t>(n);
  const std::size_t base = rows / static_cast<std::size_t>(n);
  const std::size_t extra = rows % static_cast<std::size_t>(n);
  std::size_t pos = 0;
  for (std::size_t grp = 0; grp < g.groups; ++grp) {
    std::size_t size = base + (grp < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) g.group_of[order[pos++]] = static_cast<std::uint32_t>(grp);
  }
  auto agg = overlap_aggregates(g, ids, t);
  return keep_overlapping(table, g, agg, treatment,
                          [](std::uint32_t grp) { return static_cast<std::int64_t>(grp) + 1; });
}

SubclassifiedTable cem(const Table& table, std::span<const std::string> coarsened, std::string_view treatment) {
  const auto& t = binary_column(table, treatment);
  Grouping g = group_by(table, coarsened);
  auto agg = overlap_aggregates(g, table.ids(), t.values);
  return keep_overlapping(table, g, agg, treatment, [&](std::uint32_t grp) { return agg[grp].max_id; });
}

SubclassifiedTable exact_match(const Table& table, std::span<const std::string> covariates,
                               std::string_view treatment) {
  return cem(table, covariates, treatment);
}

SubclassifiedTable select_matched(const SubclassifiedTable& s, const Predicate& predicate) {
  auto mask = predicate.evaluate(s.units);
  auto t = s.units.values(s.treatment);
  std::map<std::int64_t, std::pair<bool, bool>> seen;  // subclass -> (has treated, has control)
  for (std::size_t r = 0; r < mask.size(); ++r) {
    if (!mask[r]) continue;
    auto& [treated, control] = seen[s.subclass[r]];
    (t[r] == 1.0 ? treated : control) = true;
  }
  std::vector<std::size_t> rows;
  std::vector<std::int64_t> subclass;
  for (std::size_t r = 0; r < mask.size(); ++r) {
    if (!mask[r]) continue;
    auto [treated, control] = seen[s.subclass[r]];
    if (!treated || !control) continue;
    rows.push_back(r);
    subclass.push_back(s.subclass[r]);
  }
  return SubclassifiedTable{s.units.take(rows), std::move(subclass), s.treatment};
}

SubclassifiedTable cem_pushdown(std::span<const Table> relations, std::span<const JoinSpec> joins,
                                const std::map<std::string, std::vector<std::string>>& covariates_per_relation,
                                std::string_view treatment, PushdownStats* stats) {
  if (relations.empty()) throw ArgumentError("cem_pushdown needs at least one relation");
  if (joins.size() + 1 != relations.size())
    throw ArgumentError("cem_pushdown needs exactly one join per additional relation");

  std::vector<std::string> covariates;
  auto add_covariates = [&](const Table& rel) {
    auto it = covariates_per_relation.find(rel.name());
    if (it == covariates_per_relation.end()) return;
    for (const auto& c : it->second)
      if (std::ranges::find(covariates, c) == covariates.end()) covariates.push_back(c);
  };
  auto step = [&](const Table& input) {
    auto out = cem(input, covariates, treatment);
    if (stats) {
      stats->cem_input_rows.push_back(input.rows());
      stats->cem_output_rows.push_back(out.rows());
    }
    return out;
  };

  std::set<std::string> joined{relations[0].name()};
  add_covariates(relations[0]);
  SubclassifiedTable acc = step(relations[0]);

  for (std::size_t i = 1; i < relations.size(); ++i) {
    const Table& rel = relations[i];
    const JoinSpec& spec = joins[i - 1];
    if (stats) stats->join_input_rows.push_back(acc.rows());
    Table next;
    if (spec.parent == rel.name() && joined.contains(spec.child)) {
      next = join(rel, acc.units, spec);
    } else if (spec.child == rel.name() && joined.contains(spec.parent)) {
      next = join(acc.units, rel, spec);
    } else {
      throw ArgumentError("join " + spec.child + " -> " + spec.parent + " does not connect relation '" +
                          rel.name() + "' to the relations joined so far");
    }
    joined.insert(rel.name());
    add_covariates(rel);
    acc = step(next);
  }
  return acc;
}

void write_subclassified_csv(const SubclassifiedTable& s, std::ostream& out) {
  const Table& t = s.units;
  out << t.id_name();
  for (std::size_t c = 0; c < t.column_count(); ++c) out << ',' << t.column(c).name;
  out << ",subclass\n";
  auto ids = t.ids();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    out << ids[r];
    for (std::size_t c = 0; c < t.column_count(); ++c) out << ',' << t.column(c).text(r);
    out << ',' << s.subclass[r] << '\n';
  }
}

void write_subclassified_csv(const SubclassifiedTable& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_subclassified_csv(s, out);
}

SubclassifiedTable read_subclassified_csv(const std::filesystem::path& path, Schema schema, std::string treatment) {
  schema.kinds["subclass"] = ColumnKind::Numeric;
  Table t = load_csv(path, schema);
  auto values = t.values("subclass");
  std::vector<std::int64_t> subclass(values.begin(), values.end());
  Table units = t.without_column("subclass");
  units = units.with_roles({treatment}, std::nullopt);
  return SubclassifiedTable{std::move(units), std::move(subclass), std::move(treatment)};
}

}  // namespace matchdb
