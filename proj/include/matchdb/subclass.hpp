#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "matchdb/table.hpp"

namespace matchdb {

// Units annotated with a subclass. Every subclass holds at least one
// treated and one control unit.
struct SubclassifiedTable {
  Table units;
  std::vector<std::int64_t> subclass;  // aligned with units rows
  std::string treatment;

  std::size_t rows() const { return units.rows(); }
  std::size_t subclass_count() const;
};

// Quantile subclassification on the propensity column: rows sorted by
// (ps, id) are cut into n contiguous groups whose sizes differ by at most
// one (earlier groups are the larger ones). Groups without overlap are
// dropped. Subclass ids are 1..n; rows keep their input order.
SubclassifiedTable subclassify_ps(const Table& table, int n, std::string_view ps_column = "ps");

// Coarsened exact matching: group by exact equality over the coarsened
// columns and keep groups containing both treatment values. The subclass
// id is the largest unit id in the group.
SubclassifiedTable cem(const Table& table, std::span<const std::string> coarsened, std::string_view treatment);

// cem over the raw covariate values.
SubclassifiedTable exact_match(const Table& table, std::span<const std::string> covariates,
                               std::string_view treatment);

// Rows of a matched subset satisfying the predicate, after which any
// subclass left without both treatment values is dropped.
SubclassifiedTable select_matched(const SubclassifiedTable& s, const Predicate& predicate);

// Row counts seen by cem_pushdown, for cost instrumentation.
struct PushdownStats {
  std::vector<std::size_t> cem_input_rows;   // one entry per cem step
  std::vector<std::size_t> cem_output_rows;
  std::vector<std::size_t> join_input_rows;  // accumulated side, per join
};

// CEM interleaved with joins over a normalized schema. relations[0]
// carries the treatment; joins[i] links relations[i + 1] to the
// relations already joined (either as parent or as child). After every
// join, cem runs on the covariates available so far.
SubclassifiedTable cem_pushdown(std::span<const Table> relations, std::span<const JoinSpec> joins,
                                const std::map<std::string, std::vector<std::string>>& covariates_per_relation,
                                std::string_view treatment, PushdownStats* stats = nullptr);

// Original columns plus a trailing `subclass` column.
void write_subclassified_csv(const SubclassifiedTable& s, std::ostream& out);
void write_subclassified_csv(const SubclassifiedTable& s, const std::filesystem::path& path);
// Inverse of write_subclassified_csv; `schema` describes the unit columns.
SubclassifiedTable read_subclassified_csv(const std::filesystem::path& path, Schema schema,
                                          std::string treatment);

}  // namespace matchdb
