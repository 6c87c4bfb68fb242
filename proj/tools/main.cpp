#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "errors.hpp"
#include "matchdb/parallel.hpp"

int main(int argc, char** argv) {
  using namespace matchdb;
  CLI::App app{"matchdb: matching, subclassification and treatment-effect estimation over CSV data"};
  app.require_subcommand(1);

  std::string config, out = ".", matched, store, treatment, where;
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();

  auto add_common = [&](CLI::App* cmd, bool takes_config) {
    if (takes_config)
      cmd->add_option("--config", config, "Analysis config (JSON with comments)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", out, "Output directory")->capture_default_str();
    cmd->add_option("--threads", threads, "Worker threads (0 = all cores)");
  };
  auto* match = app.add_subcommand("match", "Run the configured matching method; writes matched.csv or pairs.csv");
  add_common(match, true);
  auto* balance = app.add_subcommand("balance", "AWMD balance report of a matched file; writes balance.csv/.txt");
  add_common(balance, true);
  balance->add_option("--matched", matched, "matched.csv or pairs.csv from `match`")->required();
  auto* ate = app.add_subcommand("ate", "Average treatment effect of a matched file; writes ate.txt");
  add_common(ate, true);
  ate->add_option("--matched", matched, "matched.csv or pairs.csv from `match`")->required();
  auto* prepare = app.add_subcommand("prepare", "Prepare a database for repeated CEM queries; writes a store to --out");
  add_common(prepare, true);
  auto* query = app.add_subcommand("query", "CEM for one treatment from a prepared store; writes matched.csv");
  add_common(query, false);
  query->add_option("--store", store, "Directory written by `prepare`")->required();
  query->add_option("--treatment", treatment, "Treatment to analyse")->required();
  query->add_option("--where", where, "Subpopulation predicate, e.g. \"region = 'north' AND x1 > 0\"");

  CLI11_PARSE(app, argc, argv);

  try {
    set_threads(threads);
    if (*match) {
      cli::cmd_match(cli::load_config(config), out);
    } else if (*balance) {
      cli::cmd_balance(cli::load_config(config), matched, out);
    } else if (*ate) {
      cli::cmd_ate(cli::load_config(config), matched, out);
    } else if (*prepare) {
      cli::cmd_prepare(cli::load_config(config), out);
    } else if (*query) {
      cli::cmd_query(store, treatment, where, out);
    }
  } catch (const cli::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
