#include <doctest.h>

#include <random>
#include <sstream>

#include "commands.hpp"
#include "errors.hpp"
#include "matchdb/error.hpp"
#include "tempdir.hpp"

using namespace matchdb;
using namespace matchdb::cli;
using synth::read_file;
using synth::TempDir;
using synth::write_file;

namespace {

// units.csv with discrete x, z and Y = 3 T + x^2 - z.
void write_units(const std::filesystem::path& dir, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> lv(0, 3);
  std::bernoulli_distribution bt(0.4);
  std::ostringstream s;
  s << "id,x,z,T,Y\n";
  for (std::size_t i = 0; i < n; ++i) {
    int x = lv(rng), z = lv(rng), t = bt(rng);
    s << i + 1 << ',' << x << ',' << z << ',' << t << ',' << 3 * t + x * x - z << '\n';
  }
  write_file(dir / "units.csv", s.str());
}

std::string config_text(const std::string& analysis) {
  return R"({
    "inputs": [{"name": "units", "path": "units.csv",
                "columns": {"x": "numeric", "z": "numeric", "T": "binary", "Y": "numeric"}}],
    "treatments": [{"column": "T", "covariates": ["x", "z"]}],
    "outcome": "Y",
    "analysis": )" + analysis + R"(,
    "prepare": {"groups": 1}
  })";
}

std::string value_of(const std::string& report, const std::string& key) {
  std::istringstream in(report);
  std::string line;
  while (std::getline(in, line))
    if (line.rfind(key + "\t", 0) == 0) return line.substr(key.size() + 1);
  return {};
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("nearest neighbour methods require a caliper") {
    TempDir dir("cfg");
    CHECK_THROWS_WITH_AS(parse_config(config_text(R"({"method": "nnmwr"})"), dir.path),
                         doctest::Contains("caliper"), ConfigError);
  }

  TEST_CASE("an unknown method names the field") {
    TempDir dir("cfg");
    CHECK_THROWS_WITH_AS(parse_config(config_text(R"({"method": "magic"})"), dir.path),
                         doctest::Contains("analysis.method"), ConfigError);
  }

  TEST_CASE("validation reports every error at once") {
    TempDir dir("cfg");
    std::string text = R"({
      "inputs": [{"name": "units", "path": "units.csv", "columns": {"x": "numeric"}}],
      "treatments": [{"column": "T", "covariates": []}],
      "bogus": 1,
      "analysis": {"method": "cem", "subclasses": 0}
    })";
    try {
      parse_config(text, dir.path);
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      std::string msg = e.what();
      CHECK(msg.find("bogus") != std::string::npos);
      CHECK(msg.find("covariates") != std::string::npos);
      CHECK(msg.find("subclasses") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("{ not json", dir.path), ConfigError);
  }

  TEST_CASE("comments are accepted and paths resolve against the config directory") {
    TempDir dir("cfg");
    write_units(dir.path, 10, 1);
    auto cfg = parse_config("// header\n" + config_text(R"({"method": "exact" /* inline */})"), dir.path);
    CHECK(cfg.inputs[0].path == dir.path / "units.csv");
    CHECK(cfg.analysis.method == Method::Exact);
  }

  TEST_CASE("exact matching balance is zero and ate recovers the effect") {
    TempDir dir("run");
    write_units(dir.path, 2000, 501);
    auto cfg = parse_config(config_text(R"({"method": "exact"})"), dir.path);
    auto out = dir.path / "out";
    cmd_match(cfg, out);
    CHECK(std::filesystem::exists(out / "matched.csv"));
    CHECK(std::filesystem::exists(out / "run.log"));
    cmd_balance(cfg, out / "matched.csv", out);
    std::istringstream csv(read_file(out / "balance.csv"));
    std::string line;
    std::getline(csv, line);
    int rows = 0;
    while (std::getline(csv, line)) {
      if (line.rfind('#', 0) == 0) continue;
      ++rows;
      auto matched = std::stod(line.substr(line.rfind(',') + 1));
      CHECK(matched <= 1e-12);
    }
    CHECK(rows == 2);
    cmd_ate(cfg, out / "matched.csv", out);
    CHECK(std::abs(std::stod(value_of(read_file(out / "ate.txt"), "ate")) - 3.0) < 1e-9);
  }

  TEST_CASE("nnm writes pairs and ate reads them") {
    TempDir dir("nnm");
    write_units(dir.path, 600, 511);
    auto cfg = parse_config(config_text(R"({"method": "nnmwr", "caliper": 0.5, "distance": "mahalanobis"})"), dir.path);
    auto out = dir.path / "out";
    cmd_match(cfg, out);
    CHECK(std::filesystem::exists(out / "pairs.csv"));
    cmd_ate(cfg, out / "pairs.csv", out);
    CHECK(std::abs(std::stod(value_of(read_file(out / "ate.txt"), "ate")) - 3.0) < 1e-9);
  }

  TEST_CASE("missing matched file and empty matched set are explicit errors") {
    TempDir dir("err");
    write_units(dir.path, 100, 521);
    auto cfg = parse_config(config_text(R"({"method": "exact"})"), dir.path);
    CHECK_THROWS_AS(cmd_balance(cfg, dir.path / "nope.csv", dir.path), DataError);
    CHECK_THROWS_AS(cmd_ate(cfg, dir.path / "nope.csv", dir.path), DataError);
    write_file(dir.path / "empty.csv", "id,x,z,T,Y,subclass\n");
    CHECK_THROWS_WITH(cmd_ate(cfg, dir.path / "empty.csv", dir.path), doctest::Contains("overlap"));
  }

  TEST_CASE("prepare then query equals match, and unknown treatments list the options") {
    TempDir dir("prep");
    write_units(dir.path, 1500, 531);
    auto cfg = parse_config(config_text(R"({"method": "cem"})"), dir.path);
    cmd_match(cfg, dir.path / "direct");
    cmd_prepare(cfg, dir.path / "store");
    cmd_query(dir.path / "store", "T", "", dir.path / "queried");
    CHECK(read_file(dir.path / "direct" / "matched.csv") == read_file(dir.path / "queried" / "matched.csv"));
    CHECK_THROWS_WITH(cmd_query(dir.path / "store", "U", "", dir.path / "q2"), doctest::Contains("available: T"));
  }

  TEST_CASE("outputs are deterministic") {
    TempDir dir("det");
    write_units(dir.path, 800, 541);
    auto cfg = parse_config(config_text(R"({"method": "psSubclass", "subclasses": 4})"), dir.path);
    cmd_match(cfg, dir.path / "a");
    cmd_match(cfg, dir.path / "b");
    for (const char* f : {"matched.csv", "model.txt", "run.log"})
      CHECK(read_file(dir.path / "a" / f) == read_file(dir.path / "b" / f));
  }
}
