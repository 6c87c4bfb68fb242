#include "matchdb/predicate.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "matchdb/error.hpp"
#include "matchdb/table.hpp"

namespace matchdb {

struct Predicate::Node {
  enum class Kind { True, Compare, And, Or, Not } kind = Kind::True;
  std::string column;
  CompareOp op = CompareOp::Eq;
  Literal value;
  std::shared_ptr<const Node> lhs, rhs;
};

namespace {

using NodePtr = std::shared_ptr<const Predicate::Node>;

std::string_view op_text(CompareOp op) {
  switch (op) {
    case CompareOp::Eq: return "=";
    case CompareOp::Ne: return "!=";
    case CompareOp::Lt: return "<";
    case CompareOp::Le: return "<=";
    case CompareOp::Gt: return ">";
    case CompareOp::Ge: return ">=";
  }
  return "=";
}

template <class T>
bool apply(CompareOp op, const T& a, const T& b) {
  switch (op) {
    case CompareOp::Eq: return a == b;
    case CompareOp::Ne: return a != b;
    case CompareOp::Lt: return a < b;
    case CompareOp::Le: return a <= b;
    case CompareOp::Gt: return a > b;
    case CompareOp::Ge: return a >= b;
  }
  return false;
}

void collect_columns(const NodePtr& n, std::vector<std::string>& out) {
  if (!n) return;
  if (n->kind == Predicate::Node::Kind::Compare &&
      std::ranges::find(out, n->column) == out.end())
    out.push_back(n->column);
  collect_columns(n->lhs, out);
  collect_columns(n->rhs, out);
}

std::vector<std::uint8_t> eval_compare(const Predicate::Node& n, const Table& t) {
  std::vector<std::uint8_t> mask(t.rows(), 0);
  if (n.column == t.id_name() && !t.has(n.column)) {
    const double* num = std::get_if<double>(&n.value);
    if (!num) throw ColumnError("id column '" + n.column + "' compared with a string");
    auto ids = t.ids();
    for (std::size_t r = 0; r < ids.size(); ++r) mask[r] = apply(n.op, static_cast<double>(ids[r]), *num);
    return mask;
  }
  const auto& col = t.column(n.column);
  if (col.kind == ColumnKind::Categorical) {
    const auto* label = std::get_if<std::string>(&n.value);
    if (!label) throw ColumnError("categorical column '" + n.column + "' compared with a number");
    if (n.op != CompareOp::Eq && n.op != CompareOp::Ne)
      throw ColumnError("categorical column '" + n.column + "' supports only = and !=");
    auto code = col.dictionary->find(*label);
    bool eq = n.op == CompareOp::Eq;
    for (std::size_t r = 0; r < col.size(); ++r) {
      bool match = code && col.values[r] == static_cast<double>(*code);
      mask[r] = match == eq;
    }
    return mask;
  }
  const double* num = std::get_if<double>(&n.value);
  if (!num) throw ColumnError("column '" + n.column + "' is " + std::string(to_string(col.kind)) +
                              " and cannot be compared with a string");
  for (std::size_t r = 0; r < col.size(); ++r) mask[r] = apply(n.op, col.values[r], *num);
  return mask;
}

std::vector<std::uint8_t> eval(const NodePtr& n, const Table& t) {
  using K = Predicate::Node::Kind;
  switch (n->kind) {
    case K::True: return std::vector<std::uint8_t>(t.rows(), 1);
    case K::Compare: return eval_compare(*n, t);
    case K::Not: {
      auto m = eval(n->lhs, t);
      for (auto& b : m) b = !b;
      return m;
    }
    case K::And:
    case K::Or: {
      auto a = eval(n->lhs, t);
      auto b = eval(n->rhs, t);
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = n->kind == K::And ? (a[i] && b[i]) : (a[i] || b[i]);
      return a;
    }
  }
  return {};
}

std::string render(const NodePtr& n) {
  using K = Predicate::Node::Kind;
  switch (n->kind) {
    case K::True: return "TRUE";
    case K::Compare: {
      std::string v;
      if (const auto* s = std::get_if<std::string>(&n->value))
        v = "\"" + *s + "\"";
      else
        v = format_double(std::get<double>(n->value));
      return n->column + " " + std::string(op_text(n->op)) + " " + v;
    }
    case K::Not: return "NOT (" + render(n->lhs) + ")";
    case K::And: return "(" + render(n->lhs) + " AND " + render(n->rhs) + ")";
    case K::Or: return "(" + render(n->lhs) + " OR " + render(n->rhs) + ")";
  }
  return {};
}

// Recursive-descent parser:
//   or   := and ("OR" and)*
//   and  := unary ("AND" unary)*
//   unary:= "NOT" unary | "(" or ")" | "TRUE" | cmp
//   cmp  := ident op literal
class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr parse() {
    skip_ws();
    if (pos_ == text_.size()) return std::make_shared<Predicate::Node>();
    auto n = parse_or();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ArgumentError("predicate '" + std::string(text_) + "': " + what + " at offset " + std::to_string(pos_));
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool keyword(std::string_view kw) {
    skip_ws();
    if (text_.size() - pos_ < kw.size()) return false;
    for (std::size_t i = 0; i < kw.size(); ++i)
      if (std::toupper(static_cast<unsigned char>(text_[pos_ + i])) != kw[i]) return false;
    std::size_t end = pos_ + kw.size();
    if (end < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_'))
      return false;
    pos_ = end;
    return true;
  }

  static NodePtr combine(Predicate::Node::Kind k, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Predicate::Node>();
    n->kind = k;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
  }

  NodePtr parse_or() {
    auto n = parse_and();
    while (keyword("OR")) n = combine(Predicate::Node::Kind::Or, n, parse_and());
    return n;
  }

  NodePtr parse_and() {
    auto n = parse_unary();
    while (keyword("AND")) n = combine(Predicate::Node::Kind::And, n, parse_unary());
    return n;
  }

  NodePtr parse_unary() {
    if (keyword("NOT")) return combine(Predicate::Node::Kind::Not, parse_unary(), nullptr);
    if (keyword("TRUE")) return std::make_shared<Predicate::Node>();
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      ++pos_;
      auto n = parse_or();
      skip_ws();
      if (pos_ >= text_.size() || text_[pos_] != ')') fail("expected ')'");
      ++pos_;
      return n;
    }
    return parse_compare();
  }

  NodePtr parse_compare() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' || text_[pos_] == '.'))
      ++pos_;
    if (start == pos_) fail("expected column name");
    auto n = std::make_shared<Predicate::Node>();
    n->kind = Predicate::Node::Kind::Compare;
    n->column = std::string(text_.substr(start, pos_ - start));
    skip_ws();
    auto rest = text_.substr(pos_);
    auto take = [&](std::string_view tok, CompareOp op) {
      if (rest.starts_with(tok)) {
        pos_ += tok.size();
        n->op = op;
        return true;
      }
      return false;
    };
    if (!(take("==", CompareOp::Eq) || take("!=", CompareOp::Ne) || take("<>", CompareOp::Ne) ||
          take("<=", CompareOp::Le) || take(">=", CompareOp::Ge) || take("=", CompareOp::Eq) ||
          take("<", CompareOp::Lt) || take(">", CompareOp::Gt)))
      fail("expected comparison operator");
    skip_ws();
    if (pos_ >= text_.size()) fail("expected literal");
    char q = text_[pos_];
    if (q == '"' || q == '\'') {
      auto close = text_.find(q, pos_ + 1);
      if (close == std::string_view::npos) fail("unterminated string");
      n->value = std::string(text_.substr(pos_ + 1, close - pos_ - 1));
      pos_ = close + 1;
      return n;
    }
    double v = 0.0;
    auto [p, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
    if (ec != std::errc()) fail("expected number or quoted string");
    pos_ = static_cast<std::size_t>(p - text_.data());
    n->value = v;
    return n;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Predicate::Predicate() : root_(std::make_shared<Node>()) {}

Predicate Predicate::compare(std::string column, CompareOp op, Literal value) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Compare;
  n->column = std::move(column);
  n->op = op;
  n->value = std::move(value);
  return Predicate(std::move(n));
}

Predicate Predicate::parse(std::string_view text) { return Predicate(Parser(text).parse()); }

Predicate operator&&(const Predicate& a, const Predicate& b) {
  auto n = std::make_shared<Predicate::Node>();
  n->kind = Predicate::Node::Kind::And;
  n->lhs = a.root_;
  n->rhs = b.root_;
  return Predicate(std::move(n));
}

Predicate operator||(const Predicate& a, const Predicate& b) {
  auto n = std::make_shared<Predicate::Node>();
  n->kind = Predicate::Node::Kind::Or;
  n->lhs = a.root_;
  n->rhs = b.root_;
  return Predicate(std::move(n));
}

Predicate operator!(const Predicate& a) {
  auto n = std::make_shared<Predicate::Node>();
  n->kind = Predicate::Node::Kind::Not;
  n->lhs = a.root_;
  return Predicate(std::move(n));
}

bool Predicate::is_always() const { return root_->kind == Node::Kind::True; }

std::vector<std::string> Predicate::columns() const {
  std::vector<std::string> out;
  collect_columns(root_, out);
  return out;
}

std::vector<std::uint8_t> Predicate::evaluate(const Table& table) const {
  for (const auto& c : columns())
    if (!table.has(c) && c != table.id_name()) table.column(c);  // throws ColumnError
  return eval(root_, table);
}

std::string Predicate::to_string() const { return render(root_); }

}  // namespace matchdb
