#include "matchdb/coarsen.hpp"

#include <algorithm>
#include <cmath>

#include "matchdb/error.hpp"
#include "matchdb/table.hpp"

namespace matchdb {

void CutpointSpec::set(std::string covariate, Cutpoints cuts) {
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    if (!std::isfinite(cuts[i]))
      throw ArgumentError("cutpoints for '" + covariate + "' must be finite");
    if (i > 0 && !(cuts[i - 1] < cuts[i]))
      throw ArgumentError("cutpoints for '" + covariate + "' must be strictly increasing");
  }
  for (auto& [name, existing] : entries_)
    if (name == covariate) {
      existing = std::move(cuts);
      return;
    }
  entries_.emplace_back(std::move(covariate), std::move(cuts));
}

const Cutpoints* CutpointSpec::find(std::string_view covariate) const {
  for (const auto& [name, cuts] : entries_)
    if (name == covariate) return &cuts;
  return nullptr;
}

std::vector<std::string> CutpointSpec::covariates() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.first);
  return out;
}

std::string coarsened_name(std::string_view covariate) { return std::string(covariate) + "_c"; }

int bucket_of(std::span<const double> cuts, double x) {
  return 1 + static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), x) - cuts.begin());
}

Table coarsen(const Table& table, const CutpointSpec& spec) {
  Table out = table;
  for (const auto& [name, cuts] : spec.entries()) {
    const auto& col = table.column(name);
    if (col.kind == ColumnKind::Categorical && !cuts.empty())
      throw ColumnError("categorical covariate '" + name + "' cannot take cutpoints");
    std::vector<double> coarse(col.size());
    if (cuts.empty()) {
      coarse = col.values;
    } else {
      for (std::size_t r = 0; r < col.size(); ++r) coarse[r] = bucket_of(cuts, col.values[r]);
    }
    out = out.with_column(Column::numeric(coarsened_name(name), std::move(coarse)));
  }
  return out;
}

Cutpoints equal_width_cutpoints(const Table& table, std::string_view covariate, int k) {
  const auto& col = table.column(covariate);
  if (col.kind == ColumnKind::Categorical)
    throw ColumnError("covariate '" + std::string(covariate) + "' is categorical");
  if (k < 1) throw ArgumentError("bucket count must be >= 1");
  if (col.size() == 0) throw ArgumentError("covariate '" + std::string(covariate) + "' has no rows");
  if (k == 1) return {};
  auto [lo, hi] = std::ranges::minmax(col.values);
  if (lo == hi)
    throw ArgumentError("covariate '" + std::string(covariate) + "' is constant; cannot form " +
                        std::to_string(k) + " equal-width buckets");
  Cutpoints cuts;
  double width = (hi - lo) / k;
  for (int i = 1; i < k; ++i) cuts.push_back(lo + i * width);
  return cuts;
}

CoarsenedDistance coarsened_distance(const Table& table, std::size_t row_a, std::size_t row_b,
                                     std::span<const std::string> coarsened_columns) {
  for (const auto& name : coarsened_columns) {
    auto v = table.values(name);
    if (v[row_a] != v[row_b]) return CoarsenedDistance::Incomparable;
  }
  return CoarsenedDistance::Zero;
}

}  // namespace matchdb
