#include "matchdb/multi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "matchdb/error.hpp"
#include "matchdb/grouping.hpp"

namespace matchdb {

const std::vector<std::string>& TreatmentSet::covariates_of(std::string_view treatment) const {
  auto it = covariates.find(std::string(treatment));
  if (it == covariates.end()) throw ArgumentError("treatment '" + std::string(treatment) + "' has no covariates");
  return it->second;
}

void TreatmentSet::validate(const Table& table) const {
  if (treatments.empty()) throw ArgumentError("treatment set is empty");
  for (const auto& t : treatments) {
    if (table.column(t).kind != ColumnKind::Binary) throw ColumnError("treatment '" + t + "' is not binary");
    const auto& covs = covariates_of(t);
    if (covs.empty()) throw ArgumentError("treatment '" + t + "' has an empty covariate list");
    for (const auto& c : covs) table.column(c);
  }
}

double phi(const Table& table, std::string_view t1, std::string_view t2) {
  const auto& a = table.column(t1);
  const auto& b = table.column(t2);
  if (a.kind != ColumnKind::Binary || b.kind != ColumnKind::Binary)
    throw ColumnError("phi needs two binary columns");
  double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
  for (std::size_t r = 0; r < a.size(); ++r) {
    bool x = a.values[r] == 1.0, y = b.values[r] == 1.0;
    // rows index the second treatment, columns the first
    if (y && x) ++n11;
    else if (y && !x) ++n10;
    else if (!y && x) ++n01;
    else ++n00;
  }
  double r1 = n11 + n10, r0 = n01 + n00, c1 = n11 + n01, c0 = n10 + n00;
  if (r1 == 0 || r0 == 0 || c1 == 0 || c0 == 0)
    throw ArgumentError("phi(" + std::string(t1) + ", " + std::string(t2) +
                        ") is undefined: a treatment is constant");
  return (n11 * n00 - n10 * n01) / std::sqrt(r1 * r0 * c1 * c0);
}

double group_score(std::span<const std::size_t> members, const std::vector<std::vector<double>>& abs_phi) {
  if (members.size() < 2) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < members.size(); ++i)
    for (std::size_t j = i + 1; j < members.size(); ++j) s += abs_phi[members[i]][members[j]];
  return s / static_cast<double>(members.size());
}

namespace {

// |phi| for every pair from one scan: per-row treatment bitmasks give the
// treated counts, and only rows with two or more treatments touch pairs.
std::vector<std::vector<double>> abs_phi_matrix(const Table& table, const std::vector<std::string>& treatments) {
  const std::size_t k = treatments.size();
  std::vector<std::vector<double>> m(k, std::vector<double>(k, 0.0));
  if (k > 64) {
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j) m[i][j] = m[j][i] = std::abs(phi(table, treatments[i], treatments[j]));
    return m;
  }
  std::vector<std::span<const double>> cols;
  for (const auto& t : treatments) cols.push_back(table.values(t));
  std::vector<double> n1(k, 0.0);
  std::vector<std::vector<double>> n11(k, std::vector<double>(k, 0.0));
  std::vector<std::size_t> members;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    std::uint64_t bits = 0;
    for (std::size_t t = 0; t < k; ++t) bits |= std::uint64_t{cols[t][r] == 1.0} << t;
    if (bits == 0) continue;
    members.clear();
    for (std::size_t t = 0; t < k; ++t)
      if ((bits >> t) & 1) {
        ++n1[t];
        members.push_back(t);
      }
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b) ++n11[members[a]][members[b]];
  }
  const double n = static_cast<double>(table.rows());
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      // Same cell layout as phi(table, treatments[i], treatments[j]).
      double both = n11[i][j];
      double n10 = n1[j] - both, n01 = n1[i] - both, n00 = n - n1[i] - n1[j] + both;
      double r1 = both + n10, r0 = n01 + n00, c1 = both + n01, c0 = n10 + n00;
      if (r1 == 0 || r0 == 0 || c1 == 0 || c0 == 0)
        throw ArgumentError("phi(" + treatments[i] + ", " + treatments[j] + ") is undefined: a treatment is constant");
      m[i][j] = m[j][i] = std::abs((both * n00 - n10 * n01) / std::sqrt(r1 * r0 * c1 * c0));
    }
  return m;
}

std::vector<std::string> shared_covariates(const TreatmentSet& ts, std::span<const std::size_t> members) {
  std::vector<std::string> out;
  for (const auto& c : ts.covariates_of(ts.treatments[members[0]])) {
    bool everywhere = std::ranges::all_of(members, [&](std::size_t m) {
      const auto& covs = ts.covariates_of(ts.treatments[m]);
      return std::ranges::find(covs, c) != covs.end();
    });
    if (everywhere && std::ranges::find(out, c) == out.end()) out.push_back(c);
  }
  return out;
}

std::vector<std::string> union_covariates(const TreatmentSet& ts, std::span<const std::size_t> members) {
  std::vector<std::string> out;
  for (auto m : members)
    for (const auto& c : ts.covariates_of(ts.treatments[m]))
      if (std::ranges::find(out, c) == out.end()) out.push_back(c);
  return out;
}

bool feasible(const TreatmentSet& ts, std::span<const std::size_t> members) {
  return members.size() < 2 || !shared_covariates(ts, members).empty();
}

FactoredPartition build(const TreatmentSet& ts, const std::vector<std::vector<std::size_t>>& groups,
                        const std::vector<std::vector<double>>& abs_phi) {
  FactoredPartition p;
  for (const auto& g : groups) {
    TreatmentGroup tg;
    for (auto m : g) tg.treatments.push_back(ts.treatments[m]);
    tg.shared = shared_covariates(ts, g);
    tg.all = union_covariates(ts, g);
    tg.score = group_score(g, abs_phi);
    p.objective += tg.score;
    p.groups.push_back(std::move(tg));
  }
  return p;
}

// Visits restricted growth strings of length k using exactly n labels, in
// lexicographic order.
template <class Visit>
void for_each_partition(std::size_t k, std::size_t n, Visit&& visit) {
  std::vector<std::size_t> a(k, 0);
  auto rec = [&](auto& self, std::size_t pos, std::size_t used) -> void {
    if (k - pos < n - used) return;  // not enough positions left to open the remaining labels
    if (pos == k) {
      if (used == n) visit(a);
      return;
    }
    for (std::size_t v = 0; v <= used && v < n; ++v) {
      a[pos] = v;
      self(self, pos + 1, std::max(used, v + 1));
    }
  };
  rec(rec, 0, 0);
}

}  // namespace

FactoredPartition partition_treatments(const TreatmentSet& ts, const Table& table, std::size_t n) {
  const std::size_t k = ts.treatments.size();
  if (n < 1 || n > k)
    throw ArgumentError("group count " + std::to_string(n) + " must be in 1.." + std::to_string(k));
  ts.validate(table);

  auto abs_phi = abs_phi_matrix(table, ts.treatments);

  if (k <= 10) {
    bool found = false;
    double best = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<std::size_t>> best_groups;
    for_each_partition(k, n, [&](const std::vector<std::size_t>& assign) {
      std::vector<std::vector<std::size_t>> groups(n);
      for (std::size_t i = 0; i < k; ++i) groups[assign[i]].push_back(i);
      double obj = 0.0;
      for (const auto& g : groups) {
        if (!feasible(ts, g)) return;
        obj += group_score(g, abs_phi);
      }
      if (!found || obj > best + 1e-12) {
        found = true;
        best = obj;
        best_groups = std::move(groups);
      }
    });
    if (!found)
      throw ArgumentError("no feasible partition of " + std::to_string(k) + " treatments into " + std::to_string(n) +
                          " groups (multi-treatment groups must share a covariate)");
    return build(ts, best_groups, abs_phi);
  }

  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < k; ++i) groups.push_back({i});
  while (groups.size() > n) {
    double best_gain = -std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 0;
    bool any = false;
    for (std::size_t a = 0; a < groups.size(); ++a)
      for (std::size_t b = a + 1; b < groups.size(); ++b) {
        auto merged = groups[a];
        merged.insert(merged.end(), groups[b].begin(), groups[b].end());
        std::sort(merged.begin(), merged.end());
        if (!feasible(ts, merged)) continue;
        double gain = group_score(merged, abs_phi) - group_score(groups[a], abs_phi) - group_score(groups[b], abs_phi);
        if (!any || gain > best_gain + 1e-12) {
          any = true;
          best_gain = gain;
          ba = a;
          bb = b;
        }
      }
    if (!any) throw ArgumentError("greedy partitioning found no feasible merge above " + std::to_string(n) + " groups");
    groups[ba].insert(groups[ba].end(), groups[bb].begin(), groups[bb].end());
    std::sort(groups[ba].begin(), groups[ba].end());
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(bb));
  }
  return build(ts, groups, abs_phi);
}

FactoredTable covariate_factor(const Table& table, std::span<const std::string> treatments,
                               std::span<const std::string> shared) {
  if (shared.empty()) throw ArgumentError("covariate factoring needs at least one shared covariate");
  if (treatments.empty()) throw ArgumentError("covariate factoring needs at least one treatment");
  Grouping g = group_by(table, shared);
  std::vector<std::uint8_t> keep(g.groups, 0);
  std::vector<OverlapAggregate> first;
  for (const auto& t : treatments) {
    const auto& col = table.column(t);
    if (col.kind != ColumnKind::Binary) throw ColumnError("treatment '" + t + "' is not binary");
    auto agg = overlap_aggregates(g, table.ids(), col.values);
    for (std::size_t i = 0; i < agg.size(); ++i) keep[i] |= agg[i].overlaps();
    if (first.empty()) first = std::move(agg);
  }
  std::vector<std::size_t> rows;
  std::vector<std::int64_t> super;
  for (std::size_t r = 0; r < g.group_of.size(); ++r) {
    if (!keep[g.group_of[r]]) continue;
    rows.push_back(r);
    super.push_back(first[g.group_of[r]].max_id);
  }
  return FactoredTable{table.take(rows), std::move(super), {treatments.begin(), treatments.end()},
                       {shared.begin(), shared.end()}};
}

SubclassifiedTable mcem(const FactoredTable& factored, std::string_view treatment,
                        std::span<const std::string> extra) {
  if (std::ranges::find(factored.treatments, treatment) == factored.treatments.end())
    throw ArgumentError("treatment '" + std::string(treatment) + "' was not part of the factored group");
  const Table& units = factored.units;
  const auto& t = units.column(treatment);
  std::vector<double> super(factored.supersubclass.begin(), factored.supersubclass.end());
  std::vector<std::span<const double>> keys{super};
  for (const auto& c : extra) keys.push_back(units.values(c));
  Grouping g = group_by(keys, units.rows());
  auto agg = overlap_aggregates(g, units.ids(), t.values);
  std::vector<std::size_t> rows;
  std::vector<std::int64_t> subclass;
  for (std::size_t r = 0; r < g.group_of.size(); ++r) {
    const auto& a = agg[g.group_of[r]];
    if (!a.overlaps()) continue;
    rows.push_back(r);
    subclass.push_back(a.max_id);
  }
  return SubclassifiedTable{units.take(rows), std::move(subclass), std::string(treatment)};
}

}  // namespace matchdb
