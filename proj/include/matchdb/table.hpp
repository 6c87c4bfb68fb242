#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace matchdb {

enum class ColumnKind { Numeric, Categorical, Binary };

std::string_view to_string(ColumnKind kind);
ColumnKind parse_column_kind(std::string_view text);

// Interned categorical labels. Codes are dense and assigned in first-seen
// order.
class Dictionary {
 public:
  std::int32_t intern(std::string_view label);
  std::optional<std::int32_t> find(std::string_view label) const;
  const std::string& label(std::int32_t code) const;
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::int32_t> codes_;
};

// One typed column. Every kind is stored as doubles: numeric values as-is,
// binary as 0/1 and categorical as the dictionary code.
struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<double> values;
  std::shared_ptr<const Dictionary> dictionary;  // categorical only

  std::size_t size() const { return values.size(); }
  std::string text(std::size_t row) const;

  static Column numeric(std::string name, std::vector<double> values);
  static Column binary(std::string name, std::vector<double> values);
  static Column categorical(std::string name, std::span<const std::string> labels);
};

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

// Immutable columnar relation of units. Columns are shared between tables
// derived from one another, so projections and additions are cheap.
class Table {
 public:
  Table() = default;
  Table(std::string name, std::string id_name, std::vector<std::int64_t> ids,
        std::vector<Column> columns);

  const std::string& name() const { return name_; }
  const std::string& id_name() const { return id_name_; }
  std::span<const std::int64_t> ids() const { return *ids_; }
  std::size_t rows() const { return ids_ ? ids_->size() : 0; }
  std::size_t column_count() const { return columns_.size(); }
  const Column& column(std::size_t i) const { return *columns_[i]; }
  std::vector<std::string> column_names() const;

  bool has(std::string_view name) const;
  const Column& column(std::string_view name) const;
  std::span<const double> values(std::string_view name) const { return column(name).values; }
  // Cell rendered as text; the id column is addressable by its name.
  std::string cell_text(std::size_t row, std::string_view name) const;

  // Designated treatment columns and outcome.
  const std::vector<std::string>& treatments() const { return treatments_; }
  const std::string& treatment() const;
  const std::optional<std::string>& outcome() const { return outcome_; }
  Table with_roles(std::vector<std::string> treatments, std::optional<std::string> outcome) const;

  Table with_column(Column column) const;
  Table without_column(std::string_view name) const;
  Table renamed(std::string name) const;
  Table take(std::span<const std::size_t> rows) const;
  // Row positions whose mask entry is nonzero, in order.
  Table filter(std::span<const std::uint8_t> mask) const;

 private:
  std::optional<std::size_t> index_of(std::string_view name) const;

  std::string name_;
  std::string id_name_ = "id";
  std::shared_ptr<const std::vector<std::int64_t>> ids_ =
      std::make_shared<const std::vector<std::int64_t>>();
  std::vector<std::shared_ptr<const Column>> columns_;
  std::vector<std::string> treatments_;
  std::optional<std::string> outcome_;
};

// Column-by-column equality on decoded values (categorical compared by
// label), including ids, names and roles.
bool same_content(const Table& a, const Table& b);

struct Schema {
  std::string id_column = "id";
  std::map<std::string, ColumnKind> kinds;
};

Table load_csv(const std::filesystem::path& path, const Schema& schema, std::string name = {});
Table parse_csv(std::istream& in, const Schema& schema, std::string name = {});
void write_csv(const Table& table, std::ostream& out);
void write_csv(const Table& table, const std::filesystem::path& path);

// Many-to-one key/foreign-key link from child rows to parent rows.
struct JoinSpec {
  std::string parent;
  std::string child;
  std::string parent_key;
  std::string child_key;
};

// Inner equi-join. The result keeps the child ids and column order, then
// appends every parent column other than the key.
Table join(const Table& parent, const Table& child, const JoinSpec& spec);

class Predicate;
Table select(const Table& table, const Predicate& predicate);

}  // namespace matchdb
