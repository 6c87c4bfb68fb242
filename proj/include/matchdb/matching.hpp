#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace matchdb {

class Table;

// |ps_i - ps_j| over a propensity column.
struct PropensityDistance {
  std::string column = "ps";
};

// (x_i - x_j)' S (x_i - x_j) with S the inverse covariance.
struct MahalanobisDistance {
  std::vector<std::string> covariates;
  Eigen::MatrixXd inverse_covariance;
};

// 0 when every coarsened column agrees, otherwise never admissible.
struct CoarsenedMatchDistance {
  std::vector<std::string> columns;
};

using DistanceSpec = std::variant<PropensityDistance, MahalanobisDistance, CoarsenedMatchDistance>;

struct MatchedPair {
  std::int64_t treated = 0;
  std::int64_t control = 0;
  double distance = 0.0;
  int order = 1;  // rank of this control among the treated unit's matches

  friend bool operator==(const MatchedPair&, const MatchedPair&) = default;
};

using MatchedPairs = std::vector<MatchedPair>;

double mahalanobis(std::span<const double> a, std::span<const double> b, const Eigen::MatrixXd& inverse_covariance);

// Inverse of the sample covariance (n - 1 denominator) plus ridge * I.
Eigen::MatrixXd covariance_inverse(const Table& table, std::span<const std::string> covariates, double ridge);

// k nearest controls per treated unit with distance < caliper; controls may
// be reused. Output is sorted by (treated id, order); within a treated unit
// controls are ranked by (distance, control id). Uses the table's first
// designated treatment.
MatchedPairs nnm_with_replacement(const Table& table, const DistanceSpec& distance, int k, double caliper);

// Greedy matching over all admissible pairs in ascending
// (distance, treated id, control id) order: a pair is kept when its control
// is unused and its treated unit has fewer than k matches.
MatchedPairs nnm_without_replacement(const Table& table, const DistanceSpec& distance, int k, double caliper);

void write_pairs_csv(const MatchedPairs& pairs, std::ostream& out);
void write_pairs_csv(const MatchedPairs& pairs, const std::filesystem::path& path);
MatchedPairs read_pairs_csv(const std::filesystem::path& path);

}  // namespace matchdb
