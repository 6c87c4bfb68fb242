#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "matchdb/matching.hpp"
#include "matchdb/subclass.hpp"

namespace matchdb {

// Flattened stratification: one entry per (possibly repeated) unit.
struct Strata {
  std::vector<std::int64_t> subclass;
  std::vector<double> treatment;
  std::vector<double> value;
};

// sum_b (n_b / N) * f(mean(value | T=1, b) - mean(value | T=0, b)) with f
// the identity or the absolute value. Throws on empty input or on a
// subclass missing either treatment value.
double weighted_mean_difference(std::span<const std::int64_t> subclass, std::span<const double> treatment,
                                std::span<const double> value, bool absolute);

Strata strata_of(const SubclassifiedTable& s, std::string_view column);

// Each pair becomes a two-unit subclass.
Strata pair_strata(const MatchedPairs& pairs, const Table& table, std::string_view column);

double ate_subclass(const SubclassifiedTable& s, std::string_view outcome);
double ate_matched(const MatchedPairs& pairs, const Table& table, std::string_view outcome);
double awmd(const SubclassifiedTable& s, std::string_view covariate);
double awmd(const Strata& strata);

struct BalanceRow {
  std::string covariate;
  double raw = 0.0;
  double matched = 0.0;
};

struct BalanceReport {
  std::string method;
  std::size_t raw_treated = 0;
  std::size_t raw_control = 0;
  std::size_t matched_treated = 0;
  std::size_t matched_control = 0;
  std::vector<BalanceRow> rows;
};

// Raw-side AWMD treats the whole raw table as one subclass.
BalanceReport balance_report(const Table& raw, const SubclassifiedTable& matched,
                             std::span<const std::string> covariates, std::string method = "matched");
// Balance of matched pairs; counts are distinct treated and control units.
BalanceReport balance_report(const Table& raw, const MatchedPairs& pairs, std::string_view treatment,
                             std::span<const std::string> covariates, std::string method = "matched");

void write_balance_csv(const BalanceReport& report, std::ostream& out);
// Fixed-width layout: Method | Control | Treated | one AWMD column per covariate.
void write_balance_text(const BalanceReport& report, std::ostream& out);

}  // namespace matchdb
