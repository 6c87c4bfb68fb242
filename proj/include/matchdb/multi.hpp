#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "matchdb/subclass.hpp"
#include "matchdb/table.hpp"

namespace matchdb {

// Binary treatments with the coarsened covariates each is matched on.
struct TreatmentSet {
  std::vector<std::string> treatments;
  std::map<std::string, std::vector<std::string>> covariates;

  const std::vector<std::string>& covariates_of(std::string_view treatment) const;
  void validate(const Table& table) const;
};

// Phi coefficient of two binary columns. Throws when a margin is zero.
double phi(const Table& table, std::string_view t1, std::string_view t2);

struct TreatmentGroup {
  std::vector<std::string> treatments;
  std::vector<std::string> shared;  // intersection of member covariates, in first-member order
  std::vector<std::string> all;     // union of member covariates
  double score = 0.0;               // sum of |phi| over member pairs / group size
};

struct FactoredPartition {
  std::vector<TreatmentGroup> groups;
  double objective = 0.0;
};

// Splits the treatments into n groups maximizing the summed group scores,
// subject to every multi-member group sharing at least one covariate.
// Exhaustive for up to 10 treatments; greedy merging beyond.
FactoredPartition partition_treatments(const TreatmentSet& ts, const Table& table, std::size_t n);

// Score of one candidate group under a phi matrix indexed like ts.treatments.
double group_score(std::span<const std::size_t> members, const std::vector<std::vector<double>>& abs_phi);

// Units grouped on a treatment group's shared covariates. A group is kept
// when any member treatment has both values in it; its supersubclass is
// the largest unit id.
struct FactoredTable {
  Table units;
  std::vector<std::int64_t> supersubclass;
  std::vector<std::string> treatments;
  std::vector<std::string> shared;
};

FactoredTable covariate_factor(const Table& table, std::span<const std::string> treatments,
                               std::span<const std::string> shared);

// CEM for one member treatment over a factored table: group by
// (supersubclass, extra covariates) and filter on that treatment.
SubclassifiedTable mcem(const FactoredTable& factored, std::string_view treatment,
                        std::span<const std::string> extra);

}  // namespace matchdb
