#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "matchdb/error.hpp"
#include "matchdb/predicate.hpp"
#include "matchdb/prepared.hpp"
#include "oracle.hpp"
#include "synth.hpp"
#include "tempdir.hpp"

using namespace matchdb;
using synth::TempDir;
namespace fs = std::filesystem;

namespace {


// Five sparse treatments over four covariates; t1..t3 share x1, x2.
struct Scenario {
  Table table;
  TreatmentSet ts;
};

Scenario five_treatments(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  auto t = synth::discrete_units(rng, n, 4, 4, 5, 0.08);
  TreatmentSet ts;
  ts.treatments = {"t1", "t2", "t3", "t4", "t5"};
  ts.covariates = {{"t1", {"x1", "x2"}},
                   {"t2", {"x1", "x2", "x3"}},
                   {"t3", {"x1", "x2", "x4"}},
                   {"t4", {"x3", "x4"}},
                   {"t5", {"x2", "x3", "x4"}}};
  return {t, ts};
}

}  // namespace

TEST_SUITE("prepared") {
  TEST_CASE("a single treatment store equals cem") {
    std::mt19937_64 rng(401);
    auto t = synth::discrete_units(rng, 1000, 3, 3);
    TreatmentSet ts{{"t1"}, {{"t1", {"x1", "x2", "x3"}}}};
    auto store = prepare_database(t, ts, 1);
    CHECK(store.groups.size() == 1);
    CHECK(synth::subclass_map(query_prepared(store, "t1")) == synth::subclass_map(cem(t, ts.covariates["t1"], "t1")));
  }

  TEST_CASE("every treatment of a prepared store equals direct cem") {
    auto sc = five_treatments(411, 1500);
    for (std::size_t n : {2, 3, 5}) {
      auto store = prepare_database(sc.table, sc.ts, n);
      CHECK(store.groups.size() == n);
      for (const auto& tr : sc.ts.treatments) {
        auto got = query_prepared(store, tr);
        CHECK(synth::subclass_map(got) == oracle::cem(sc.table, sc.ts.covariates[tr], tr));
      }
    }
  }

  TEST_CASE("queries with a predicate equal select then refilter") {
    auto sc = five_treatments(421, 3000);
    auto store = prepare_database(sc.table, sc.ts, 2);
    auto pred = Predicate::parse("x1 >= 1 AND x3 != 2");
    for (const auto& tr : sc.ts.treatments) {
      auto direct = cem(sc.table, sc.ts.covariates[tr], tr);
      auto mask = pred.evaluate(direct.units);
      std::map<std::int64_t, std::int64_t> kept;
      auto ids = direct.units.ids();
      for (std::size_t r = 0; r < direct.rows(); ++r)
        if (mask[r]) kept[ids[r]] = direct.subclass[r];
      auto want = oracle::refilter(kept, synth::column_by_id(sc.table, tr));
      CHECK(synth::subclass_map(query_prepared(store, tr, pred)) == want);
    }
    CHECK(query_prepared(store, "t1", Predicate::parse("x1 > 100")).rows() == 0);
  }

  TEST_CASE("unknown treatment names the available ones") {
    auto sc = five_treatments(431, 500);
    auto store = prepare_database(sc.table, sc.ts, 2);
    CHECK_THROWS_WITH(query_prepared(store, "t9"), doctest::Contains("available: "));
  }

  TEST_CASE("save and load round trip") {
    auto sc = five_treatments(441, 2500);
    const std::string names[] = {"north", "south", "east"};
    std::vector<std::string> labels(sc.table.rows());
    for (std::size_t r = 0; r < labels.size(); ++r) labels[r] = names[r % 3];
    auto t = sc.table.with_column(Column::categorical("region", labels));
    auto ts = sc.ts;
    ts.covariates["t4"].push_back("region");
    auto store = prepare_database(t, ts, 2);

    TempDir dir("store");
    save_store(store, dir.path);
    CHECK(fs::exists(dir.path / "manifest.txt"));
    auto loaded = load_store(dir.path);
    CHECK(loaded.treatment_names() == store.treatment_names());
    REQUIRE(loaded.groups.size() == store.groups.size());
    for (std::size_t g = 0; g < store.groups.size(); ++g) {
      CHECK(loaded.groups[g].group.treatments == store.groups[g].group.treatments);
      CHECK(loaded.groups[g].lattice.cuboids.size() == store.groups[g].lattice.cuboids.size());
      CHECK(same_content(loaded.groups[g].factored.units, store.groups[g].factored.units));
    }
    for (const auto& tr : ts.treatments) {
      auto a = query_prepared(store, tr);
      auto b = query_prepared(loaded, tr);
      CHECK(synth::subclass_map(a) == synth::subclass_map(b));
      CHECK(same_content(a.units, b.units));
    }
    auto pred = Predicate::parse("region = \"south\"");
    CHECK(synth::subclass_map(query_prepared(store, "t4", pred)) ==
          synth::subclass_map(query_prepared(loaded, "t4", pred)));
  }

  TEST_CASE("load reports a missing or corrupt store") {
    TempDir dir("bad");
    CHECK_THROWS_AS(load_store(dir.path), DataError);
    std::ofstream(dir.path / "manifest.txt") << "not a store\n";
    CHECK_THROWS_AS(load_store(dir.path), DataError);
  }

  TEST_CASE("subset hash ignores order") {
    std::vector<std::string> a{"x1", "x2"}, b{"x2", "x1"}, c{"x1"};
    CHECK(subset_hash(a) == subset_hash(b));
    CHECK(subset_hash(a) != subset_hash(c));
    CHECK(subset_hash(a).size() == 16);
  }
}
