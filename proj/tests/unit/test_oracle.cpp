#include <doctest.h>

#include "oracle.hpp"
#include "synth.hpp"

using namespace matchdb;

TEST_SUITE("oracle") {
  TEST_CASE("bucket and phi on hand-worked values") {
    std::vector<double> cuts{1, 2, 3};
    CHECK(oracle::bucket(cuts, 0.5) == 1);
    CHECK(oracle::bucket(cuts, 1) == 2);
    CHECK(oracle::bucket(cuts, 3.5) == 4);
    CHECK(oracle::phi({1, 0, 1, 0}, {1, 0, 1, 0}) == doctest::Approx(1));
  }

  TEST_CASE("cem by pairwise comparison") {
    Table t("u", "id", {1, 2, 3, 4, 5},
            {Column::numeric("x", {0, 0, 1, 1, 2}), Column::binary("t", {1, 0, 1, 1, 0})});
    auto m = oracle::cem(t, {"x"}, "t");
    CHECK(m == std::map<std::int64_t, std::int64_t>{{1, 2}, {2, 2}});
  }

  TEST_CASE("max matching and gauss jordan") {
    CHECK(oracle::max_matching({{true, true}, {true, false}}) == 2);
    CHECK(oracle::max_matching({{true, false}, {true, false}}) == 1);
    auto inv = oracle::gauss_jordan_inverse({{2, 0}, {0, 4}});
    CHECK(inv[0][0] == doctest::Approx(0.5));
    CHECK(inv[1][1] == doctest::Approx(0.25));
  }

  TEST_CASE("best partition over labelings") {
    auto r = oracle::best_partition(
        3, 2, [](const std::vector<std::size_t>&) { return true; },
        [](const std::vector<std::size_t>& g) { return g.size() == 2 && g[0] == 0 && g[1] == 2 ? 1.0 : 0.0; });
    CHECK(r.found);
    CHECK(r.objective == 1.0);
    CHECK(r.groups == std::vector<std::vector<std::size_t>>{{0, 2}, {1}});
  }

  TEST_CASE("weighted mean difference and refilter") {
    CHECK(oracle::weighted_mean_difference({1, 1, 2, 2}, {1, 0, 1, 0}, {2, 1, 1, 2}, false) == doctest::Approx(0));
    CHECK(oracle::weighted_mean_difference({1, 1, 2, 2}, {1, 0, 1, 0}, {2, 1, 1, 2}, true) == doctest::Approx(1));
    auto kept = oracle::refilter({{1, 10}, {2, 10}, {3, 20}}, {{1, 1}, {2, 0}, {3, 1}});
    CHECK(kept == std::map<std::int64_t, std::int64_t>{{1, 10}, {2, 10}});
  }
}
