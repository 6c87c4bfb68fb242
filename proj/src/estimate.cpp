#include "matchdb/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "matchdb/error.hpp"
#include "matchdb/parallel.hpp"

namespace matchdb {

double weighted_mean_difference(std::span<const std::int64_t> subclass, std::span<const double> treatment,
                                std::span<const double> value, bool absolute) {
  if (subclass.empty()) throw ArgumentError("no matched units: overlap is empty");
  if (subclass.size() != treatment.size() || subclass.size() != value.size())
    throw ArgumentError("strata vectors differ in length");

  struct Cell {
    std::vector<double> treated, control;
  };
  std::map<std::int64_t, Cell> cells;  // ordered by subclass id for a fixed summation order
  for (std::size_t i = 0; i < subclass.size(); ++i) {
    auto& c = cells[subclass[i]];
    (treatment[i] == 1.0 ? c.treated : c.control).push_back(value[i]);
  }
  const double total = static_cast<double>(subclass.size());
  std::vector<double> terms;
  terms.reserve(cells.size());
  for (const auto& [id, c] : cells) {
    if (c.treated.empty() || c.control.empty())
      throw ArgumentError("subclass " + std::to_string(id) + " lacks overlap");
    double mt = pairwise_sum(c.treated) / static_cast<double>(c.treated.size());
    double mc = pairwise_sum(c.control) / static_cast<double>(c.control.size());
    double diff = absolute ? std::abs(mt - mc) : mt - mc;
    double weight = static_cast<double>(c.treated.size() + c.control.size()) / total;
    terms.push_back(weight * diff);
  }
  return pairwise_sum(terms);
}

Strata strata_of(const SubclassifiedTable& s, std::string_view column) {
  const auto& col = s.units.column(column);
  if (col.kind == ColumnKind::Categorical) throw ColumnError("column '" + col.name + "' is categorical");
  auto t = s.units.values(s.treatment);
  return Strata{s.subclass, {t.begin(), t.end()}, col.values};
}

Strata pair_strata(const MatchedPairs& pairs, const Table& table, std::string_view column) {
  const auto& col = table.column(column);
  if (col.kind == ColumnKind::Categorical) throw ColumnError("column '" + col.name + "' is categorical");
  std::unordered_map<std::int64_t, std::size_t> row_of;
  auto ids = table.ids();
  for (std::size_t r = 0; r < ids.size(); ++r) row_of.emplace(ids[r], r);
  auto lookup = [&](std::int64_t id) {
    auto it = row_of.find(id);
    if (it == row_of.end()) throw ArgumentError("matched pair refers to unknown unit id " + std::to_string(id));
    return col.values[it->second];
  };
  Strata s;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto b = static_cast<std::int64_t>(i + 1);
    s.subclass.insert(s.subclass.end(), {b, b});
    s.treatment.insert(s.treatment.end(), {1.0, 0.0});
    s.value.push_back(lookup(pairs[i].treated));
    s.value.push_back(lookup(pairs[i].control));
  }
  return s;
}

double ate_subclass(const SubclassifiedTable& s, std::string_view outcome) {
  auto st = strata_of(s, outcome);
  return weighted_mean_difference(st.subclass, st.treatment, st.value, false);
}

double ate_matched(const MatchedPairs& pairs, const Table& table, std::string_view outcome) {
  if (pairs.empty()) throw ArgumentError("no matched pairs: overlap is empty");
  auto st = pair_strata(pairs, table, outcome);
  std::vector<double> diffs(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) diffs[i] = st.value[2 * i] - st.value[2 * i + 1];
  return pairwise_sum(diffs) / static_cast<double>(diffs.size());
}

double awmd(const SubclassifiedTable& s, std::string_view covariate) { return awmd(strata_of(s, covariate)); }

double awmd(const Strata& strata) {
  return weighted_mean_difference(strata.subclass, strata.treatment, strata.value, true);
}

namespace {

void count_raw(const Table& raw, std::string_view treatment, BalanceReport& r) {
  for (double v : raw.values(treatment)) (v == 1.0 ? r.raw_treated : r.raw_control)++;
}

double raw_awmd(const Table& raw, std::string_view treatment, std::string_view covariate) {
  const auto& col = raw.column(covariate);
  if (col.kind == ColumnKind::Categorical) throw ColumnError("covariate '" + col.name + "' is categorical");
  std::vector<std::int64_t> one(raw.rows(), 0);
  auto t = raw.values(treatment);
  return weighted_mean_difference(one, t, col.values, true);
}

}  // namespace

BalanceReport balance_report(const Table& raw, const SubclassifiedTable& matched,
                             std::span<const std::string> covariates, std::string method) {
  BalanceReport r;
  r.method = std::move(method);
  count_raw(raw, matched.treatment, r);
  for (double v : matched.units.values(matched.treatment)) (v == 1.0 ? r.matched_treated : r.matched_control)++;
  for (const auto& c : covariates) {
    BalanceRow row{c, raw_awmd(raw, matched.treatment, c), 0.0};
    row.matched = matched.rows() == 0 ? 0.0 : awmd(matched, c);
    r.rows.push_back(row);
  }
  return r;
}

BalanceReport balance_report(const Table& raw, const MatchedPairs& pairs, std::string_view treatment,
                             std::span<const std::string> covariates, std::string method) {
  BalanceReport r;
  r.method = std::move(method);
  count_raw(raw, treatment, r);
  std::unordered_set<std::int64_t> t_ids, c_ids;
  for (const auto& p : pairs) {
    t_ids.insert(p.treated);
    c_ids.insert(p.control);
  }
  r.matched_treated = t_ids.size();
  r.matched_control = c_ids.size();
  for (const auto& c : covariates) {
    BalanceRow row{c, raw_awmd(raw, treatment, c), 0.0};
    row.matched = pairs.empty() ? 0.0 : awmd(pair_strata(pairs, raw, c));
    r.rows.push_back(row);
  }
  return r;
}

void write_balance_csv(const BalanceReport& report, std::ostream& out) {
  out << "covariate,awmd_raw,awmd_matched\n";
  for (const auto& row : report.rows)
    out << row.covariate << ',' << format_double(row.raw) << ',' << format_double(row.matched) << '\n';
  out << "#counts,raw_control=" << report.raw_control << ",raw_treated=" << report.raw_treated
      << ",matched_control=" << report.matched_control << ",matched_treated=" << report.matched_treated << '\n';
}

void write_balance_text(const BalanceReport& report, std::ostream& out) {
  std::vector<std::string> header{"Method", "Control", "Treated"};
  for (const auto& row : report.rows) header.push_back(row.covariate);
  auto fixed = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << v;
    return s.str();
  };
  std::vector<std::vector<std::string>> lines{header};
  std::vector<std::string> raw{"Raw Data", std::to_string(report.raw_control), std::to_string(report.raw_treated)};
  std::vector<std::string> matched{report.method, std::to_string(report.matched_control),
                                   std::to_string(report.matched_treated)};
  for (const auto& row : report.rows) {
    raw.push_back(fixed(row.raw));
    matched.push_back(fixed(row.matched));
  }
  lines.push_back(raw);
  lines.push_back(matched);

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& l : lines)
    for (std::size_t i = 0; i < l.size(); ++i) width[i] = std::max(width[i], l[i].size());
  for (std::size_t li = 0; li < lines.size(); ++li) {
    for (std::size_t i = 0; i < lines[li].size(); ++i) {
      if (i > 0) out << " | ";
      if (i == 0)
        out << std::left << std::setw(static_cast<int>(width[i])) << lines[li][i];
      else
        out << std::right << std::setw(static_cast<int>(width[i])) << lines[li][i];
    }
    out << '\n';
    if (li == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out << std::string(total + 3 * (width.size() - 1), '-') << '\n';
    }
  }
  out << std::left;
}

}  // namespace matchdb
