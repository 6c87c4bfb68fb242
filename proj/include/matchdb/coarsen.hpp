#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace matchdb {

class Table;

// Ascending cutpoints c1 < ... < c(k-1) for one covariate. Values below c1
// fall in bucket 1, values in [c(i-1), c(i)) in bucket i, and values at or
// above c(k-1) in bucket k. No cutpoints means exact-value matching.
using Cutpoints = std::vector<double>;

class CutpointSpec {
 public:
  // Throws ArgumentError unless the cutpoints are finite and strictly
  // increasing. Re-setting a covariate replaces its cutpoints.
  void set(std::string covariate, Cutpoints cuts);
  const Cutpoints* find(std::string_view covariate) const;
  const std::vector<std::pair<std::string, Cutpoints>>& entries() const { return entries_; }
  std::vector<std::string> covariates() const;

 private:
  std::vector<std::pair<std::string, Cutpoints>> entries_;
};

// Name of the coarsened column derived from a covariate.
std::string coarsened_name(std::string_view covariate);

// 1 + number of cutpoints <= x.
int bucket_of(std::span<const double> cuts, double x);

// Adds one coarsened column per covariate in the spec. Covariates with
// empty cutpoints copy their value (categorical columns copy their code).
Table coarsen(const Table& table, const CutpointSpec& spec);

// k-1 cutpoints at min + i * (max - min) / k.
Cutpoints equal_width_cutpoints(const Table& table, std::string_view covariate, int k);

enum class CoarsenedDistance { Zero, Incomparable };

CoarsenedDistance coarsened_distance(const Table& table, std::size_t row_a, std::size_t row_b,
                                     std::span<const std::string> coarsened_columns);

}  // namespace matchdb
