#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace matchdb {

class Table;

enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge };

using Literal = std::variant<double, std::string>;

// Row predicate: column comparisons combined with AND / OR / NOT.
//
// Text form, as accepted by parse():
//   year >= 2010 AND (airport = "EWR" OR airport = 'JFK')
//   NOT snow = 1
// Keywords are case-insensitive. The empty string and TRUE denote the
// always-true predicate. Categorical columns compare against quoted labels
// with = and != only; numeric, binary and id columns compare against
// numbers.
class Predicate {
 public:
  Predicate();  // always true

  static Predicate always() { return Predicate(); }
  static Predicate compare(std::string column, CompareOp op, Literal value);
  static Predicate parse(std::string_view text);

  friend Predicate operator&&(const Predicate& a, const Predicate& b);
  friend Predicate operator||(const Predicate& a, const Predicate& b);
  friend Predicate operator!(const Predicate& a);

  bool is_always() const;
  std::vector<std::string> columns() const;
  // One byte per row, 1 where the predicate holds. Throws ColumnError for
  // unknown columns or kind-incompatible comparisons.
  std::vector<std::uint8_t> evaluate(const Table& table) const;
  std::string to_string() const;

  struct Node;

 private:
  explicit Predicate(std::shared_ptr<const Node> root) : root_(std::move(root)) {}
  std::shared_ptr<const Node> root_;
};

}  // namespace matchdb
