#include <doctest.h>

#include <random>
#include <sstream>

#include "matchdb/error.hpp"
#include "matchdb/grouping.hpp"
#include "matchdb/predicate.hpp"
#include "matchdb/table.hpp"
#include "oracle.hpp"
#include "synth.hpp"

using namespace matchdb;

namespace {

Table csv(const std::string& text, const Schema& schema, std::string name = "t") {
  std::istringstream in(text);
  return parse_csv(in, schema, std::move(name));
}

Schema basic_schema() {
  Schema s;
  s.kinds = {{"T", ColumnKind::Binary}, {"x", ColumnKind::Numeric}, {"Y", ColumnKind::Numeric}};
  return s;
}

std::string error_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

Table flights() {
  Schema s;
  s.kinds = {{"airport", ColumnKind::Categorical}, {"year", ColumnKind::Numeric}, {"wid", ColumnKind::Numeric}};
  return csv("id,airport,year,wid\n1,SFO,2009,1\n2,EWR,2011,1\n3,SFO,2012,2\n4,JFK,2010,9\n5,EWR,2008,2\n", s,
             "flights");
}

Table weather() {
  Schema s;
  s.id_column = "wid";
  s.kinds = {{"snow", ColumnKind::Binary}, {"temp", ColumnKind::Numeric}};
  return csv("wid,snow,temp\n1,1,-3\n2,0,12\n", s, "weather");
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("load_csv parses a three-line file") {
    auto t = csv("id,T,x,Y\n1,1,0.5,3\n2,0,1.5,4\n3,1,-2,5\n", basic_schema());
    CHECK(t.rows() == 3);
    CHECK(t.column_count() == 3);
    CHECK(t.values("x")[2] == -2.0);
    CHECK(t.ids()[1] == 2);
    CHECK(t.column("T").kind == ColumnKind::Binary);
  }

  TEST_CASE("load_csv reports a non-binary value with row and column") {
    auto msg = error_of([] { csv("id,T,x,Y\n1,1,0.5,3\n2,2,1.5,4\n", basic_schema()); });
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("'T'") != std::string::npos);
  }

  TEST_CASE("load_csv with an empty data section keeps the schema") {
    auto t = csv("id,T,x,Y\n", basic_schema());
    CHECK(t.rows() == 0);
    CHECK(t.column_count() == 3);
    CHECK(t.has("Y"));
  }

  TEST_CASE("load_csv rejects malformed input") {
    CHECK_THROWS_AS(csv("id,T,x\n1,1,0.5\n", basic_schema()), DataError);               // missing column
    CHECK_THROWS_AS(csv("id,T,x,Y,z\n1,1,0.5,3,1\n", basic_schema()), DataError);       // unknown column
    CHECK_THROWS_AS(csv("id,T,x,Y\n1,1,0.5,3\n1,0,1,1\n", basic_schema()), DataError);  // duplicate id
    CHECK_THROWS_AS(csv("id,T,x,Y\n1,1,abc,3\n", basic_schema()), DataError);           // unparseable
    CHECK_THROWS_AS(csv("id,T,x,Y\n1,1,,3\n", basic_schema()), DataError);              // missing cell
    CHECK_THROWS_AS(csv("id,T,x,Y\n1,1,nan,3\n", basic_schema()), DataError);           // non-finite
    CHECK_THROWS_AS(csv("id,T,x,Y\n1,1,0.5\n", basic_schema()), DataError);             // short row
    auto msg = error_of([] { csv("id,T,x,Y\n1,1,0.5,3\n2,0,oops,4\n", basic_schema()); });
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("'x'") != std::string::npos);
  }

  TEST_CASE("categorical interning is first-appearance ordered and bijective") {
    auto t = flights();
    const auto& c = t.column("airport");
    CHECK(c.dictionary->size() == 3);
    CHECK(c.values[0] == 0.0);
    CHECK(c.values[1] == 1.0);
    CHECK(c.values[3] == 2.0);
    for (std::int32_t code = 0; code < 3; ++code) CHECK(*c.dictionary->find(c.dictionary->label(code)) == code);
    CHECK(c.text(2) == "SFO");
  }

  TEST_CASE("csv round trip yields an identical table") {
    auto t = flights();
    std::ostringstream out;
    write_csv(t, out);
    Schema s;
    s.kinds = {{"airport", ColumnKind::Categorical}, {"year", ColumnKind::Numeric}, {"wid", ColumnKind::Numeric}};
    auto back = csv(out.str(), s, "flights");
    CHECK(same_content(t, back));

    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd(0, 1e6);
    std::vector<double> v(200);
    for (auto& x : v) x = nd(rng);
    Table r("r", "id", synth::iota_ids(v.size()), {Column::numeric("v", v)});
    std::ostringstream o2;
    write_csv(r, o2);
    Schema s2;
    s2.kinds = {{"v", ColumnKind::Numeric}};
    auto r2 = csv(o2.str(), s2, "r");
    CHECK(same_content(r, r2));
  }

  TEST_CASE("join fans out parent columns and keeps child ids") {
    auto w = weather();
    Schema cs;
    cs.kinds = {{"wid", ColumnKind::Numeric}};
    auto child = csv("id,wid\n1,1\n2,1\n", cs, "flights");
    auto j = join(w, child, JoinSpec{"weather", "flights", "wid", "wid"});
    CHECK(j.rows() == 2);
    CHECK(j.ids()[0] == 1);
    CHECK(j.ids()[1] == 2);
    CHECK(j.values("temp")[0] == -3.0);
    CHECK(j.values("temp")[1] == -3.0);
    CHECK(j.values("snow")[1] == 1.0);
  }

  TEST_CASE("join drops children without a parent") {
    auto j = join(weather(), flights(), JoinSpec{"weather", "flights", "wid", "wid"});
    CHECK(j.rows() == 4);
    auto ids = j.ids();
    CHECK(std::find(ids.begin(), ids.end(), 4) == ids.end());
    // Row count equals the count of children whose key appears in the parent.
    auto expected = oracle::scan(flights(), [](std::size_t r) { return flights().values("wid")[r] != 9.0; });
    CHECK(j.rows() == expected.size());
  }

  TEST_CASE("join rejects a duplicated parent key") {
    Schema s;
    s.id_column = "pk";
    s.kinds = {{"wid", ColumnKind::Numeric}, {"temp", ColumnKind::Numeric}};
    auto parent = csv("pk,wid,temp\n1,1,3\n2,1,4\n", s, "weather");
    CHECK_THROWS_AS(join(parent, flights(), JoinSpec{"weather", "flights", "wid", "wid"}), DataError);
  }

  TEST_CASE("join rejects colliding column names") {
    Schema s;
    s.id_column = "wid";
    s.kinds = {{"year", ColumnKind::Numeric}};
    auto parent = csv("wid,year\n1,3\n2,4\n", s, "weather");
    CHECK_THROWS_AS(join(parent, flights(), JoinSpec{"weather", "flights", "wid", "wid"}), DataError);
  }

  TEST_CASE("select filters rows in order") {
    auto t = flights();
    auto sfo = select(t, Predicate::parse("airport = \"SFO\""));
    CHECK(sfo.rows() == 2);
    CHECK(sfo.ids()[0] == 1);
    CHECK(sfo.ids()[1] == 3);
    CHECK(same_content(select(t, Predicate::always()), t));
    CHECK(same_content(select(t, Predicate::parse("")), t));
  }

  TEST_CASE("select conjunction agrees with a row scan and is idempotent") {
    auto t = flights();
    auto p = Predicate::parse("year >= 2010 AND airport = \"EWR\"");
    auto got = select(t, p);
    auto want = oracle::scan(t, [&](std::size_t r) {
      return t.values("year")[r] >= 2010 && t.column("airport").text(r) == "EWR";
    });
    REQUIRE(got.rows() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(got.ids()[i] == want[i]);
    CHECK(same_content(select(got, p), got));
  }

  TEST_CASE("select on an unknown column fails") {
    CHECK_THROWS_AS(select(flights(), Predicate::parse("gate = 3")), ColumnError);
  }

  TEST_CASE("predicate grammar") {
    auto t = flights();
    auto count = [&](const std::string& p) { return select(t, Predicate::parse(p)).rows(); };
    CHECK(count("airport = 'SFO' OR airport = 'JFK'") == 3);
    CHECK(count("NOT airport = 'SFO'") == 3);
    CHECK(count("not (year < 2010 or airport != 'EWR')") == 1);
    CHECK(count("year <> 2009 and year <= 2011") == 3);
    CHECK(count("id > 3") == 2);
    CHECK(count("TRUE") == 5);
    CHECK_THROWS_AS(Predicate::parse("year >"), ArgumentError);
    CHECK_THROWS_AS(Predicate::parse("(year > 1"), ArgumentError);
    CHECK_THROWS_AS(select(t, Predicate::parse("airport = 3")), ColumnError);
    CHECK_THROWS_AS(select(t, Predicate::parse("airport < 'SFO'")), ColumnError);
    CHECK_THROWS_AS(select(t, Predicate::parse("year = 'x'")), ColumnError);
    // to_string re-parses to the same predicate
    auto p = Predicate::parse("year >= 2010 AND (airport = 'EWR' OR NOT id = 1)");
    CHECK(count(p.to_string()) == select(t, p).rows());
    auto cols = p.columns();
    CHECK(cols.size() == 3);
  }

  TEST_CASE("unknown label compares as never equal") {
    CHECK(select(flights(), Predicate::parse("airport = 'LAX'")).rows() == 0);
    CHECK(select(flights(), Predicate::parse("airport != 'LAX'")).rows() == 5);
  }

  TEST_CASE("table invariants are enforced") {
    CHECK_THROWS_AS(Table("t", "id", {1, 1}, {Column::numeric("x", {1, 2})}), DataError);
    CHECK_THROWS_AS(Table("t", "id", {1, 2}, {Column::numeric("x", {1})}), DataError);
    CHECK_THROWS_AS(Column::binary("b", {0, 2}), DataError);
    Table t("t", "id", {1, 2}, {Column::numeric("x", {1, 2})});
    CHECK_THROWS_AS(t.with_roles({"x"}, std::nullopt), ColumnError);
    CHECK_THROWS_AS(t.column("nope"), ColumnError);
  }

  TEST_CASE("group_by matches a map-based oracle on both code paths") {
    std::mt19937_64 rng(11);
    for (int levels : {4, 300}) {
      auto t = synth::discrete_units(rng, 5000, 3, levels);
      std::vector<std::string> cols{"x1", "x2", "x3"};
      auto g = group_by(t, cols);
      auto want = oracle::group_by(t, cols, {"t1"});
      CHECK(g.groups == want.size());
      // rows share a group iff they share the key
      std::map<std::uint32_t, std::vector<double>> key_of;
      for (std::size_t r = 0; r < t.rows(); ++r) {
        std::vector<double> key{t.values("x1")[r], t.values("x2")[r], t.values("x3")[r]};
        auto [it, fresh] = key_of.try_emplace(g.group_of[r], key);
        CHECK(it->second == key);
      }
      CHECK(key_of.size() == want.size());
      // first-appearance numbering
      std::uint32_t next = 0;
      for (std::size_t r = 0; r < t.rows(); ++r) {
        if (g.group_of[r] == next) ++next;
        CHECK(g.group_of[r] < next);
      }
    }
  }

  TEST_CASE("group_by with no keys puts every row in one group") {
    std::mt19937_64 rng(3);
    auto t = synth::discrete_units(rng, 10, 1, 3);
    auto g = group_by(t, std::vector<std::string>{});
    CHECK(g.groups == 1);
    for (auto v : g.group_of) CHECK(v == 0);
  }

  TEST_CASE("group_by treats -0 and +0 as equal") {
    Table t("t", "id", {1, 2}, {Column::numeric("x", {0.0, -0.0})});
    CHECK(group_by(t, std::vector<std::string>{"x"}).groups == 1);
  }
}
