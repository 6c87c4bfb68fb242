#include "matchdb/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "matchdb/error.hpp"
#include "matchdb/predicate.hpp"

namespace matchdb {

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Numeric: return "numeric";
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::Binary: return "binary";
  }
  return "numeric";
}

ColumnKind parse_column_kind(std::string_view text) {
  if (text == "numeric") return ColumnKind::Numeric;
  if (text == "categorical") return ColumnKind::Categorical;
  if (text == "binary") return ColumnKind::Binary;
  throw ArgumentError("unknown column kind '" + std::string(text) +
                      "' (expected numeric, categorical or binary)");
}

std::int32_t Dictionary::intern(std::string_view label) {
  auto it = codes_.find(std::string(label));
  if (it != codes_.end()) return it->second;
  auto code = static_cast<std::int32_t>(labels_.size());
  labels_.emplace_back(label);
  codes_.emplace(labels_.back(), code);
  return code;
}

std::optional<std::int32_t> Dictionary::find(std::string_view label) const {
  auto it = codes_.find(std::string(label));
  if (it == codes_.end()) return std::nullopt;
  return it->second;
}

const std::string& Dictionary::label(std::int32_t code) const {
  if (code < 0 || static_cast<std::size_t>(code) >= labels_.size())
    throw ArgumentError("categorical code " + std::to_string(code) + " out of range");
  return labels_[static_cast<std::size_t>(code)];
}

std::string format_double(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string Column::text(std::size_t row) const {
  double v = values[row];
  switch (kind) {
    case ColumnKind::Categorical: return dictionary->label(static_cast<std::int32_t>(v));
    case ColumnKind::Binary: return v != 0.0 ? "1" : "0";
    case ColumnKind::Numeric: return format_double(v);
  }
  return {};
}

Column Column::numeric(std::string name, std::vector<double> values) {
  return Column{std::move(name), ColumnKind::Numeric, std::move(values), nullptr};
}

Column Column::binary(std::string name, std::vector<double> values) {
  for (double v : values)
    if (v != 0.0 && v != 1.0)
      throw DataError("binary column '" + name + "' holds value " + format_double(v));
  return Column{std::move(name), ColumnKind::Binary, std::move(values), nullptr};
}

Column Column::categorical(std::string name, std::span<const std::string> labels) {
  auto dict = std::make_shared<Dictionary>();
  std::vector<double> codes;
  codes.reserve(labels.size());
  for (const auto& l : labels) codes.push_back(dict->intern(l));
  return Column{std::move(name), ColumnKind::Categorical, std::move(codes), std::move(dict)};
}

// ---------------------------------------------------------------------------

Table::Table(std::string name, std::string id_name, std::vector<std::int64_t> ids,
             std::vector<Column> columns)
    : name_(std::move(name)), id_name_(std::move(id_name)) {
  std::unordered_set<std::int64_t> seen;
  seen.reserve(ids.size());
  for (auto id : ids)
    if (!seen.insert(id).second) throw DataError("duplicate id " + std::to_string(id));
  std::unordered_set<std::string> names{id_name_};
  for (auto& c : columns) {
    if (c.size() != ids.size())
      throw DataError("column '" + c.name + "' has " + std::to_string(c.size()) +
                      " rows, expected " + std::to_string(ids.size()));
    if (!names.insert(c.name).second) throw DataError("duplicate column '" + c.name + "'");
    if (c.kind == ColumnKind::Categorical && !c.dictionary)
      throw DataError("categorical column '" + c.name + "' has no dictionary");
    columns_.push_back(std::make_shared<const Column>(std::move(c)));
  }
  ids_ = std::make_shared<const std::vector<std::int64_t>>(std::move(ids));
}

std::vector<std::string> Table::column_names() const {
  std::vector<std::string> out;
  for (const auto& c : columns_) out.push_back(c->name);
  return out;
}

std::optional<std::size_t> Table::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i]->name == name) return i;
  return std::nullopt;
}

bool Table::has(std::string_view name) const { return index_of(name).has_value(); }

const Column& Table::column(std::string_view name) const {
  auto i = index_of(name);
  if (!i) {
    std::string where = name_.empty() ? std::string() : " in table '" + name_ + "'";
    throw ColumnError("unknown column '" + std::string(name) + "'" + where);
  }
  return *columns_[*i];
}

std::string Table::cell_text(std::size_t row, std::string_view name) const {
  if (name == id_name_ && !has(name)) return std::to_string((*ids_)[row]);
  return column(name).text(row);
}

const std::string& Table::treatment() const {
  if (treatments_.empty()) throw ColumnError("table '" + name_ + "' has no designated treatment");
  return treatments_.front();
}

Table Table::with_roles(std::vector<std::string> treatments, std::optional<std::string> outcome) const {
  for (const auto& t : treatments)
    if (column(t).kind != ColumnKind::Binary)
      throw ColumnError("treatment column '" + t + "' is not binary");
  if (outcome && column(*outcome).kind == ColumnKind::Categorical)
    throw ColumnError("outcome column '" + *outcome + "' is categorical");
  Table out = *this;
  out.treatments_ = std::move(treatments);
  out.outcome_ = std::move(outcome);
  return out;
}

Table Table::with_column(Column column) const {
  if (column.size() != rows())
    throw DataError("column '" + column.name + "' has " + std::to_string(column.size()) +
                    " rows, expected " + std::to_string(rows()));
  if (column.name == id_name_) throw DataError("column name '" + column.name + "' clashes with the id");
  Table out = *this;
  auto ptr = std::make_shared<const Column>(std::move(column));
  if (auto i = index_of(ptr->name))
    out.columns_[*i] = std::move(ptr);
  else
    out.columns_.push_back(std::move(ptr));
  return out;
}

Table Table::without_column(std::string_view name) const {
  auto i = index_of(name);
  if (!i) return *this;
  Table out = *this;
  out.columns_.erase(out.columns_.begin() + static_cast<std::ptrdiff_t>(*i));
  std::erase(out.treatments_, std::string(name));
  if (out.outcome_ == name) out.outcome_.reset();
  return out;
}

Table Table::renamed(std::string name) const {
  Table out = *this;
  out.name_ = std::move(name);
  return out;
}

Table Table::take(std::span<const std::size_t> rows) const {
  Table out = *this;
  std::vector<std::int64_t> ids;
  ids.reserve(rows.size());
  for (auto r : rows) ids.push_back((*ids_)[r]);
  out.ids_ = std::make_shared<const std::vector<std::int64_t>>(std::move(ids));
  for (auto& c : out.columns_) {
    Column copy{c->name, c->kind, {}, c->dictionary};
    copy.values.reserve(rows.size());
    for (auto r : rows) copy.values.push_back(c->values[r]);
    c = std::make_shared<const Column>(std::move(copy));
  }
  return out;
}

Table Table::filter(std::span<const std::uint8_t> mask) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) rows.push_back(i);
  return take(rows);
}

bool same_content(const Table& a, const Table& b) {
  if (a.name() != b.name() || a.id_name() != b.id_name() || a.rows() != b.rows() ||
      a.column_names() != b.column_names() || a.treatments() != b.treatments() ||
      a.outcome() != b.outcome())
    return false;
  if (!std::ranges::equal(a.ids(), b.ids())) return false;
  for (std::size_t c = 0; c < a.column_count(); ++c) {
    const auto& ca = a.column(c);
    const auto& cb = b.column(c);
    if (ca.kind != cb.kind) return false;
    for (std::size_t r = 0; r < a.rows(); ++r) {
      if (ca.kind == ColumnKind::Categorical) {
        if (ca.text(r) != cb.text(r)) return false;
      } else if (ca.values[r] != cb.values[r]) {
        return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void cell_error(std::size_t line, std::string_view column, std::string_view value,
                             std::string_view what) {
  throw DataError("line " + std::to_string(line) + ", column '" + std::string(column) + "': " +
                  std::string(what) + " '" + std::string(value) + "'");
}

}  // namespace

Table parse_csv(std::istream& in, const Schema& schema, std::string name) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV input has no header line");
  auto header_view = split_fields(trim(line));
  std::vector<std::string> header;
  for (auto h : header_view) header.emplace_back(trim(h));

  std::optional<std::size_t> id_pos;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!seen.insert(header[i]).second) throw DataError("duplicate header column '" + header[i] + "'");
    if (header[i] == schema.id_column)
      id_pos = i;
    else if (!schema.kinds.contains(header[i]))
      throw DataError("header column '" + header[i] + "' is not in the schema");
  }
  if (!id_pos) throw DataError("missing id column '" + schema.id_column + "'");
  for (const auto& [col, kind] : schema.kinds)
    if (!seen.contains(col)) throw DataError("missing column '" + col + "'");

  struct Builder {
    std::string name;
    ColumnKind kind;
    std::vector<double> values;
    std::shared_ptr<Dictionary> dict;
  };
  std::vector<Builder> builders(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i == *id_pos) continue;
    auto kind = schema.kinds.at(header[i]);
    builders[i] = Builder{header[i], kind, {},
                          kind == ColumnKind::Categorical ? std::make_shared<Dictionary>() : nullptr};
  }

  std::vector<std::int64_t> ids;
  std::unordered_set<std::int64_t> id_set;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    auto row = trim(line);
    if (row.empty()) continue;
    auto fields = split_fields(row);
    if (fields.size() != header.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    for (std::size_t i = 0; i < fields.size(); ++i) {
      auto cell = trim(fields[i]);
      if (i == *id_pos) {
        std::int64_t id = 0;
        auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), id);
        if (ec != std::errc() || p != cell.data() + cell.size() || cell.empty())
          cell_error(line_no, header[i], cell, "unparseable id");
        if (!id_set.insert(id).second) cell_error(line_no, header[i], cell, "duplicate id");
        ids.push_back(id);
        continue;
      }
      auto& b = builders[i];
      if (b.kind == ColumnKind::Categorical) {
        if (cell.empty()) cell_error(line_no, header[i], cell, "missing value");
        b.values.push_back(b.dict->intern(cell));
        continue;
      }
      double v = 0.0;
      auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty()) cell_error(line_no, header[i], cell, "missing value");
      if (ec != std::errc() || p != cell.data() + cell.size() || !std::isfinite(v))
        cell_error(line_no, header[i], cell, "unparseable value");
      if (b.kind == ColumnKind::Binary && v != 0.0 && v != 1.0)
        cell_error(line_no, header[i], cell, "binary column holds value");
      b.values.push_back(v == 0.0 ? 0.0 : v);
    }
  }

  std::vector<Column> columns;
  for (std::size_t i = 0; i < builders.size(); ++i) {
    if (i == *id_pos) continue;
    auto& b = builders[i];
    columns.push_back(Column{std::move(b.name), b.kind, std::move(b.values), std::move(b.dict)});
  }
  return Table(std::move(name), schema.id_column, std::move(ids), std::move(columns));
}

Table load_csv(const std::filesystem::path& path, const Schema& schema, std::string name) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  if (name.empty()) name = path.stem().string();
  try {
    return parse_csv(in, schema, std::move(name));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_csv(const Table& table, std::ostream& out) {
  out << table.id_name();
  for (std::size_t c = 0; c < table.column_count(); ++c) out << ',' << table.column(c).name;
  out << '\n';
  auto ids = table.ids();
  for (std::size_t r = 0; r < table.rows(); ++r) {
    out << ids[r];
    for (std::size_t c = 0; c < table.column_count(); ++c) out << ',' << table.column(c).text(r);
    out << '\n';
  }
}

void write_csv(const Table& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_csv(table, out);
}

// ---------------------------------------------------------------------------

namespace {

// Key text for joins; numeric and id keys both render through their
// canonical numeric form so 5 and 5.0 agree.
std::vector<std::string> key_texts(const Table& t, std::string_view column) {
  std::vector<std::string> out;
  out.reserve(t.rows());
  if (column == t.id_name() && !t.has(column)) {
    for (auto id : t.ids()) out.push_back(std::to_string(id));
    return out;
  }
  const auto& c = t.column(column);
  for (std::size_t r = 0; r < t.rows(); ++r) out.push_back(c.text(r));
  return out;
}

}  // namespace

Table join(const Table& parent, const Table& child, const JoinSpec& spec) {
  auto parent_keys = key_texts(parent, spec.parent_key);
  auto child_keys = key_texts(child, spec.child_key);

  std::unordered_map<std::string, std::size_t> parent_row;
  parent_row.reserve(parent_keys.size());
  for (std::size_t r = 0; r < parent_keys.size(); ++r)
    if (!parent_row.emplace(parent_keys[r], r).second)
      throw DataError("join " + spec.child + " -> " + spec.parent + ": parent key '" + spec.parent_key +
                      "' value " + parent_keys[r] + " is not unique");

  std::vector<std::size_t> child_rows, parent_rows;
  for (std::size_t r = 0; r < child_keys.size(); ++r) {
    auto it = parent_row.find(child_keys[r]);
    if (it == parent_row.end()) continue;
    child_rows.push_back(r);
    parent_rows.push_back(it->second);
  }

  Table left = child.take(child_rows);
  Table right = parent.take(parent_rows);
  std::vector<Column> columns;
  for (std::size_t c = 0; c < left.column_count(); ++c) columns.push_back(left.column(c));
  for (std::size_t c = 0; c < right.column_count(); ++c) {
    const auto& col = right.column(c);
    if (col.name == spec.parent_key) continue;
    if (left.has(col.name) || col.name == left.id_name())
      throw DataError("join " + spec.child + " -> " + spec.parent + ": column '" + col.name +
                      "' exists on both sides");
    columns.push_back(col);
  }
  std::vector<std::int64_t> ids(left.ids().begin(), left.ids().end());
  Table out(child.name(), child.id_name(), std::move(ids), std::move(columns));

  std::vector<std::string> treatments = child.treatments();
  for (const auto& t : parent.treatments())
    if (std::ranges::find(treatments, t) == treatments.end()) treatments.push_back(t);
  auto outcome = child.outcome() ? child.outcome() : parent.outcome();
  return out.with_roles(std::move(treatments), std::move(outcome));
}

Table select(const Table& table, const Predicate& predicate) {
  return table.filter(predicate.evaluate(table));
}

}  // namespace matchdb
