#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "matchdb/error.hpp"
#include "matchdb/multi.hpp"
#include "matchdb/subclass.hpp"
#include "oracle.hpp"
#include "synth.hpp"

using namespace matchdb;

namespace {

Table binary_pair(std::vector<double> a, std::vector<double> b) {
  auto n = a.size();
  return Table("u", "id", synth::iota_ids(n), {Column::binary("a", std::move(a)), Column::binary("b", std::move(b))});
}

// Correlated treatment blocks: members of a block copy a latent coin with
// 5% flips.
Table blocks(std::mt19937_64& rng, std::size_t n, const std::vector<int>& block_of, std::size_t d, int levels) {
  auto base = synth::discrete_units(rng, n, d, levels, 0);
  std::bernoulli_distribution coin(0.4), flip(0.05);
  int nb = *std::max_element(block_of.begin(), block_of.end()) + 1;
  std::vector<std::vector<double>> latent(static_cast<std::size_t>(nb), std::vector<double>(n));
  for (auto& l : latent)
    for (auto& v : l) v = coin(rng) ? 1 : 0;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < block_of.size(); ++j) {
    std::vector<double> v(n);
    for (std::size_t r = 0; r < n; ++r) {
      double x = latent[static_cast<std::size_t>(block_of[j])][r];
      v[r] = flip(rng) ? 1 - x : x;
    }
    names.push_back("t" + std::to_string(j + 1));
    base = base.with_column(Column::binary(names.back(), std::move(v)));
  }
  return base.with_roles(names, std::nullopt);
}

std::set<std::set<std::string>> group_sets(const FactoredPartition& p) {
  std::set<std::set<std::string>> out;
  for (const auto& g : p.groups) out.insert({g.treatments.begin(), g.treatments.end()});
  return out;
}

}  // namespace

TEST_SUITE("multi") {
  TEST_CASE("phi hand examples") {
    CHECK(phi(binary_pair({1, 0, 1, 0}, {1, 0, 1, 0}), "a", "b") == doctest::Approx(1));
    CHECK(phi(binary_pair({1, 1, 0, 0}, {1, 0, 1, 0}), "a", "b") == doctest::Approx(0));
    CHECK(phi(binary_pair({1, 1, 1, 0, 0, 0, 1, 0}, {1, 1, 1, 0, 0, 0, 0, 1}), "a", "b") == doctest::Approx(0.5));
    CHECK(phi(binary_pair({1, 0, 1, 0}, {0, 1, 0, 1}), "a", "b") == doctest::Approx(-1));
    CHECK_THROWS_AS(phi(binary_pair({1, 1, 1}, {1, 0, 1}), "a", "b"), ArgumentError);
  }

  TEST_CASE("phi agrees with the oracle, is symmetric and flips sign") {
    std::mt19937_64 rng(201);
    std::bernoulli_distribution b(0.35);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> x(60), y(60), ny(60);
      for (std::size_t i = 0; i < 60; ++i) {
        x[i] = b(rng);
        y[i] = b(rng) ? x[i] : static_cast<double>(b(rng));
        ny[i] = 1 - y[i];
      }
      auto t = binary_pair(x, y).with_column(Column::binary("nb", ny));
      double p = phi(t, "a", "b");
      CHECK(p == doctest::Approx(oracle::phi(x, y)).epsilon(1e-12));
      CHECK(phi(t, "b", "a") == doctest::Approx(p).epsilon(1e-12));
      CHECK(phi(t, "a", "nb") == doctest::Approx(-p).epsilon(1e-12));
      CHECK(std::abs(p) <= 1.0 + 1e-12);
    }
  }

  TEST_CASE("group score") {
    std::vector<std::vector<double>> m{{0, 0.5, 0.3}, {0.5, 0, 0.1}, {0.3, 0.1, 0}};
    std::vector<std::size_t> single{0}, pair{0, 1}, all{0, 1, 2};
    CHECK(group_score(single, m) == 0.0);
    CHECK(group_score(pair, m) == doctest::Approx(0.25));
    CHECK(group_score(all, m) == doctest::Approx(0.3));
  }

  TEST_CASE("partition recovers correlated blocks") {
    std::mt19937_64 rng(211);
    auto t = blocks(rng, 4000, {0, 0, 0, 1, 1}, 3, 3);
    TreatmentSet ts;
    for (int j = 1; j <= 5; ++j) {
      ts.treatments.push_back("t" + std::to_string(j));
      ts.covariates["t" + std::to_string(j)] = {"x1", j <= 3 ? "x2" : "x3"};
    }
    auto p = partition_treatments(ts, t, 2);
    std::set<std::set<std::string>> want{{"t1", "t2", "t3"}, {"t4", "t5"}};
    CHECK(group_sets(p) == want);
    for (const auto& g : p.groups) {
      if (g.treatments.size() == 3) {
        CHECK(g.shared == std::vector<std::string>{"x1", "x2"});
      } else {
        CHECK(g.shared == std::vector<std::string>{"x1", "x3"});
      }
    }
    CHECK(p.objective == doctest::Approx(p.groups[0].score + p.groups[1].score));
    auto singles = partition_treatments(ts, t, 5);
    CHECK(singles.groups.size() == 5);
    CHECK(singles.objective == 0.0);
  }

  TEST_CASE("partition respects the shared covariate constraint") {
    std::mt19937_64 rng(221);
    auto t = blocks(rng, 2000, {0, 0, 1}, 3, 2);
    TreatmentSet ts{{"t1", "t2", "t3"}, {{"t1", {"x1"}}, {"t2", {"x2"}}, {"t3", {"x1", "x3"}}}};
    auto p = partition_treatments(ts, t, 2);
    for (const auto& g : p.groups)
      if (g.treatments.size() > 1) CHECK(!g.shared.empty());
    CHECK(group_sets(p) == std::set<std::set<std::string>>{{"t1", "t3"}, {"t2"}});
    TreatmentSet disjoint{{"t1", "t2"}, {{"t1", {"x1"}}, {"t2", {"x2"}}}};
    CHECK_THROWS_AS(partition_treatments(disjoint, t, 1), ArgumentError);
    CHECK_THROWS_AS(partition_treatments(disjoint, t, 0), ArgumentError);
    CHECK_THROWS_AS(partition_treatments(disjoint, t, 3), ArgumentError);
  }

  TEST_CASE("exhaustive partition equals the brute-force oracle") {
    std::mt19937_64 rng(231);
    std::uniform_int_distribution<int> kd(2, 6);
    std::bernoulli_distribution has(0.5);
    for (int rep = 0; rep < 40; ++rep) {
      std::size_t k = static_cast<std::size_t>(kd(rng));
      std::vector<int> block_of;
      for (std::size_t j = 0; j < k; ++j) block_of.push_back(static_cast<int>(rng() % 3));
      auto t = blocks(rng, 600, block_of, 4, 2);
      TreatmentSet ts;
      for (std::size_t j = 0; j < k; ++j) {
        std::string name = "t" + std::to_string(j + 1);
        ts.treatments.push_back(name);
        std::vector<std::string> covs;
        for (int c = 1; c <= 4; ++c)
          if (has(rng)) covs.push_back("x" + std::to_string(c));
        if (covs.empty()) covs.push_back("x1");
        ts.covariates[name] = covs;
      }
      std::vector<std::vector<double>> m(k, std::vector<double>(k, 0.0));
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
          if (i != j) m[i][j] = std::abs(oracle::phi(std::vector<double>(t.values(ts.treatments[i]).begin(), t.values(ts.treatments[i]).end()),
                                                     std::vector<double>(t.values(ts.treatments[j]).begin(), t.values(ts.treatments[j]).end())));
      auto feasible = [&](const std::vector<std::size_t>& g) {
        if (g.size() < 2) return true;
        for (const auto& c : ts.covariates[ts.treatments[g[0]]]) {
          bool all = true;
          for (auto x : g) {
            const auto& cv = ts.covariates[ts.treatments[x]];
            all = all && std::find(cv.begin(), cv.end(), c) != cv.end();
          }
          if (all) return true;
        }
        return false;
      };
      auto score = [&](const std::vector<std::size_t>& g) {
        double s = 0;
        for (std::size_t a = 0; a < g.size(); ++a)
          for (std::size_t b = a + 1; b < g.size(); ++b) s += m[g[a]][g[b]];
        return g.size() < 2 ? 0.0 : s / static_cast<double>(g.size());
      };
      for (std::size_t n = 1; n <= k; ++n) {
        auto want = oracle::best_partition(k, n, feasible, score);
        if (!want.found) {
          CHECK_THROWS_AS(partition_treatments(ts, t, n), ArgumentError);
          continue;
        }
        auto got = partition_treatments(ts, t, n);
        CHECK(got.objective == doctest::Approx(want.objective).epsilon(1e-9));
        CHECK(got.groups.size() == n);
      }
    }
  }

  TEST_CASE("greedy partition beyond ten treatments") {
    std::mt19937_64 rng(241);
    std::vector<int> block_of{0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3};
    auto t = blocks(rng, 3000, block_of, 2, 2);
    TreatmentSet ts;
    for (std::size_t j = 0; j < block_of.size(); ++j) {
      ts.treatments.push_back("t" + std::to_string(j + 1));
      ts.covariates[ts.treatments.back()] = {"x1", "x2"};
    }
    auto p = partition_treatments(ts, t, 4);
    std::set<std::set<std::string>> want{
        {"t1", "t2", "t3"}, {"t4", "t5", "t6"}, {"t7", "t8", "t9"}, {"t10", "t11", "t12"}};
    CHECK(group_sets(p) == want);
  }

  TEST_CASE("covariate factoring keeps the disjunction of member overlaps") {
    // x = 0: only t1 varies; x = 1: only t2 varies; x = 2: neither.
    Table t("u", "id", {1, 2, 3, 4, 5, 6},
            {Column::numeric("x", {0, 0, 1, 1, 2, 2}), Column::binary("t1", {1, 0, 1, 1, 0, 0}),
             Column::binary("t2", {0, 0, 1, 0, 1, 1})});
    std::vector<std::string> ts{"t1", "t2"}, shared{"x"};
    auto f = covariate_factor(t, ts, shared);
    CHECK(std::vector<std::int64_t>(f.units.ids().begin(), f.units.ids().end()) == std::vector<std::int64_t>{1, 2, 3, 4});
    CHECK(f.supersubclass == std::vector<std::int64_t>{2, 2, 4, 4});
    std::vector<std::string> none;
    CHECK_THROWS_AS(covariate_factor(t, ts, none), ArgumentError);
  }

  TEST_CASE("mcem equals direct cem for every member") {
    std::mt19937_64 rng(251);
    for (int rep = 0; rep < 20; ++rep) {
      auto t = synth::discrete_units(rng, 1500, 4, 3, 3, 0.2);
      std::vector<std::string> ts{"t1", "t2", "t3"}, shared{"x1", "x2"};
      auto f = covariate_factor(t, ts, shared);
      std::vector<std::vector<std::string>> extra{{"x3"}, {"x4"}, {"x3", "x4"}};
      for (std::size_t i = 0; i < 3; ++i) {
        auto all = shared;
        all.insert(all.end(), extra[i].begin(), extra[i].end());
        auto direct = cem(t, all, ts[i]);
        auto via = mcem(f, ts[i], extra[i]);
        CHECK(synth::subclass_map(direct) == synth::subclass_map(via));
      }
      CHECK_THROWS_AS(mcem(f, "t9", extra[0]), ArgumentError);
    }
  }
}
