#pragma once

// Reference implementations used as test oracles. They favour obvious
// correctness over speed and share no code with the library beyond
// reading Table cells.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "matchdb/table.hpp"

namespace oracle {

using matchdb::Table;

// Unit id -> subclass id of CEM computed by pairwise comparison of rows.
std::map<std::int64_t, std::int64_t> cem(const Table& t, const std::vector<std::string>& cols,
                                         const std::string& treatment);

// Groups by a std::map keyed on the value vector.
struct GroupAgg {
  std::int64_t count = 0;
  std::int64_t max_id = 0;
  std::vector<double> min_t, max_t;
};
std::map<std::vector<double>, GroupAgg> group_by(const Table& t, const std::vector<std::string>& cols,
                                                 const std::vector<std::string>& treatments);

// Bucket by linear scan over the cutpoints.
int bucket(const std::vector<double>& cuts, double x);

// (tID, cID, distance, order) tuples.
struct Pair {
  std::int64_t t, c;
  double d;
  int order;
};
using DistanceFn = std::function<double(std::size_t treated_row, std::size_t control_row)>;
std::vector<Pair> nnm_with_replacement(const Table& t, const std::string& treatment, const DistanceFn& dist, int k,
                                       double caliper);
std::vector<Pair> nnm_without_replacement(const Table& t, const std::string& treatment, const DistanceFn& dist,
                                          int k, double caliper);

// Maximum-cardinality one-to-one matching by exhaustive search over
// assignments (adjacency[i][j] true when treated i may match control j).
int max_matching(const std::vector<std::vector<bool>>& adjacency);

// Central differences of f at x with step h.
std::vector<double> finite_diff_gradient(const std::function<double(const std::vector<double>&)>& f,
                                         std::vector<double> x, double h);

// Inverse by Gauss-Jordan elimination with partial pivoting; row-major n x n.
std::vector<std::vector<double>> gauss_jordan_inverse(std::vector<std::vector<double>> a);

// Best partition objective over every assignment of k items into n
// nonempty labelled groups, enumerated as n^k label vectors. `feasible`
// vets a group's members; `score` gives its contribution.
struct PartitionResult {
  double objective = 0.0;
  std::vector<std::vector<std::size_t>> groups;  // canonical: sorted members, groups by first member
  bool found = false;
};
PartitionResult best_partition(std::size_t k, std::size_t n,
                               const std::function<bool(const std::vector<std::size_t>&)>& feasible,
                               const std::function<double(const std::vector<std::size_t>&)>& score);

// Weighted mean difference by explicit grouping and naive sums.
double weighted_mean_difference(const std::vector<std::int64_t>& subclass, const std::vector<double>& t,
                                const std::vector<double>& y, bool absolute);

double phi(const std::vector<double>& a, const std::vector<double>& b);

// Quantile subclassification: id -> ordinal, before overlap filtering.
std::map<std::int64_t, int> ntile(const Table& t, const std::string& ps, int n);

// Rows satisfying `keep`, evaluated one by one.
std::vector<std::int64_t> scan(const Table& t, const std::function<bool(std::size_t row)>& keep);

// Drops subclasses lacking a treated or control unit.
std::map<std::int64_t, std::int64_t> refilter(const std::map<std::int64_t, std::int64_t>& subclass_of,
                                              const std::map<std::int64_t, double>& treatment_of);

}  // namespace oracle
