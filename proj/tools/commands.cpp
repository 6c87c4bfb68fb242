#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "errors.hpp"
#include "matchdb/coarsen.hpp"
#include "matchdb/error.hpp"
#include "matchdb/estimate.hpp"
#include "matchdb/matching.hpp"
#include "matchdb/multi.hpp"
#include "matchdb/predicate.hpp"
#include "matchdb/prepared.hpp"
#include "matchdb/propensity.hpp"
#include "matchdb/subclass.hpp"

namespace matchdb::cli {

namespace {

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::size_t count_treated(const Table& t, std::string_view treatment) {
  std::size_t n = 0;
  for (double v : t.values(treatment)) n += v == 1.0;
  return n;
}

void prepare_out(const std::filesystem::path& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw DataError("cannot create output directory '" + out.string() + "': " + ec.message());
}

// Every covariate of every treatment gets a coarsened column; covariates
// without configured cutpoints match on their exact value.
CutpointSpec resolve_cutpoints(const Config& cfg, const Table& table) {
  CutpointSpec spec;
  for (const auto& [col, entry] : cfg.cutpoints) {
    if (entry.auto_buckets)
      spec.set(col, equal_width_cutpoints(table, col, *entry.auto_buckets));
    else
      spec.set(col, entry.cuts);
  }
  for (const auto& t : cfg.treatments)
    for (const auto& c : t.covariates)
      if (!spec.find(c)) spec.set(c, {});
  return spec;
}

std::vector<std::string> coarsened(const std::vector<std::string>& covariates) {
  std::vector<std::string> out;
  for (const auto& c : covariates) out.push_back(coarsened_name(c));
  return out;
}

// Covariates for which a mean difference is meaningful.
std::vector<std::string> balance_covariates(const Table& table, const std::vector<std::string>& covariates,
                                            RunLog& log) {
  std::vector<std::string> out;
  for (const auto& c : covariates) {
    if (table.column(c).kind == ColumnKind::Categorical)
      log.add("balance", "skipped categorical covariate " + c);
    else
      out.push_back(c);
  }
  return out;
}

// Matched files carry the base columns plus `ps` and `subclass`.
Schema matched_schema(const std::filesystem::path& path, const Table& base) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read matched file '" + path.string() + "'");
  std::string header;
  std::getline(in, header);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  Schema schema;
  schema.id_column = base.id_name();
  std::size_t start = 0;
  while (start <= header.size()) {
    auto pos = header.find(',', start);
    std::string name = header.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
    if (name != schema.id_column && name != "subclass")
      schema.kinds[name] = base.has(name) ? base.column(name).kind : ColumnKind::Numeric;
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return schema;
}

struct Scored {
  Table table;
  std::optional<LogisticModel> model;
};

Scored propensity_stage(const Config& cfg, const Table& table, const TreatmentSpec& t, RunLog& log) {
  const auto& covs = cfg.propensity.covariates.empty() ? t.covariates : cfg.propensity.covariates;
  auto model = fit_logistic(table, t.name, covs, cfg.propensity.fit);
  log.add("propensity", "covariates=" + join_list(covs) + " iterations=" + std::to_string(model.iterations) +
                            " converged=" + (model.converged ? "yes" : "no"));
  Table scored = score(model, table);
  if (cfg.analysis.trim) {
    auto [lo, hi] = *cfg.analysis.trim;
    scored = trim(scored, lo, hi);
    log.add("trim", "[" + exact(lo) + ", " + exact(hi) + "] kept " + std::to_string(scored.rows()) + " of " +
                        std::to_string(table.rows()));
  }
  return {std::move(scored), std::move(model)};
}

}  // namespace

void RunLog::add(std::string stage, std::string detail) { lines_.push_back(std::move(stage) + "\t" + std::move(detail)); }

void RunLog::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (const auto& l : lines_) out << l << '\n';
}

Table load_base(const Config& cfg, RunLog& log) {
  std::vector<Table> tables;
  for (const auto& in : cfg.inputs) {
    tables.push_back(load_csv(in.path, in.schema, in.name));
    log.add("load", in.name + " rows=" + std::to_string(tables.back().rows()));
  }
  Table acc = tables.front();
  std::set<std::string> joined{acc.name()};
  for (std::size_t i = 0; i < cfg.joins.size(); ++i) {
    const Table& rel = tables[i + 1];
    const auto& spec = cfg.joins[i];
    if (spec.parent == rel.name() && joined.contains(spec.child))
      acc = join(rel, acc, spec);
    else if (spec.child == rel.name() && joined.contains(spec.parent))
      acc = join(acc, rel, spec);
    else
      throw ConfigError("joins[" + std::to_string(i) + "]: does not connect input '" + rel.name() +
                        "' to the inputs joined so far");
    joined.insert(rel.name());
    log.add("join", spec.child + "." + spec.child_key + " -> " + spec.parent + "." + spec.parent_key +
                        " rows=" + std::to_string(acc.rows()));
  }
  auto spec = resolve_cutpoints(cfg, acc);
  for (const auto& [col, cuts] : spec.entries()) {
    std::string text;
    for (double c : cuts) text += (text.empty() ? "" : " ") + format_double(c);
    log.add("coarsen", col + " cutpoints=[" + text + "]");
  }
  return coarsen(acc, spec);
}

Table apply_treatment(const Table& table, const TreatmentSpec& spec, bool allow_discard, RunLog& log) {
  if (spec.column) {
    if (table.column(*spec.column).kind != ColumnKind::Binary)
      throw ConfigError("treatment column '" + *spec.column + "' is not binary");
    log.add("treatment", spec.name + " treated=" + std::to_string(count_treated(table, spec.name)) +
                             " control=" + std::to_string(table.rows() - count_treated(table, spec.name)));
    return table;
  }
  auto treated = Predicate::parse(*spec.treated_if).evaluate(table);
  auto control = Predicate::parse(*spec.control_if).evaluate(table);
  std::vector<double> value(table.rows(), 0.0);
  std::vector<std::uint8_t> keep(table.rows(), 0);
  std::size_t both = 0, discarded = 0;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    if (treated[r] && control[r]) ++both;
    value[r] = treated[r] ? 1.0 : 0.0;
    keep[r] = treated[r] || control[r];
    discarded += !keep[r];
  }
  if (both > 0)
    throw DataError("treatment '" + spec.name + "': treated_if and control_if both hold on " + std::to_string(both) +
                    " rows; the predicates must be disjoint");
  if (discarded > 0 && !allow_discard)
    throw DataError("treatment '" + spec.name + "' leaves " + std::to_string(discarded) +
                    " rows undefined; preparation needs every treatment defined on all rows");
  Table out = table.with_column(Column::binary(spec.name, std::move(value))).filter(keep);
  log.add("treatment", spec.name + " derived treated=" + std::to_string(count_treated(out, spec.name)) +
                           " control=" + std::to_string(out.rows() - count_treated(out, spec.name)) +
                           " discarded=" + std::to_string(discarded));
  return out;
}

void cmd_match(const Config& cfg, const std::filesystem::path& out) {
  prepare_out(out);
  RunLog log;
  const auto& t = cfg.analysis_treatment();
  Table table = apply_treatment(load_base(cfg, log), t, true, log).with_roles({t.name}, cfg.outcome);
  const auto method = cfg.analysis.method;
  log.add("method", std::string(to_string(method)));

  if (produces_pairs(method)) {
    DistanceSpec distance;
    Table input = table;
    if (cfg.analysis.distance == DistanceKind::Propensity) {
      auto scored = propensity_stage(cfg, table, t, log);
      input = scored.table;
      std::ofstream model_out(out / "model.txt");
      save_model(*scored.model, model_out);
      distance = PropensityDistance{};
    } else {
      distance = MahalanobisDistance{t.covariates, covariance_inverse(table, t.covariates, cfg.analysis.ridge)};
    }
    auto pairs = method == Method::Nnmwr ? nnm_with_replacement(input, distance, cfg.analysis.k, *cfg.analysis.caliper)
                                         : nnm_without_replacement(input, distance, cfg.analysis.k, *cfg.analysis.caliper);
    std::set<std::int64_t> treated, control;
    for (const auto& p : pairs) {
      treated.insert(p.treated);
      control.insert(p.control);
    }
    log.add("match", "pairs=" + std::to_string(pairs.size()) + " treated=" + std::to_string(treated.size()) +
                         " control=" + std::to_string(control.size()));
    write_pairs_csv(pairs, out / "pairs.csv");
  } else {
    SubclassifiedTable matched;
    if (method == Method::Cem) {
      matched = cem(table, coarsened(t.covariates), t.name);
    } else if (method == Method::Exact) {
      matched = exact_match(table, t.covariates, t.name);
    } else {
      auto scored = propensity_stage(cfg, table, t, log);
      std::ofstream model_out(out / "model.txt");
      save_model(*scored.model, model_out);
      matched = subclassify_ps(scored.table, cfg.analysis.subclasses);
    }
    std::size_t nt = count_treated(matched.units, t.name);
    log.add("match", "rows=" + std::to_string(matched.rows()) + " treated=" + std::to_string(nt) +
                         " control=" + std::to_string(matched.rows() - nt) +
                         " subclasses=" + std::to_string(matched.subclass_count()));
    write_subclassified_csv(matched, out / "matched.csv");
  }
  log.write(out / "run.log");
}

void cmd_balance(const Config& cfg, const std::filesystem::path& matched, const std::filesystem::path& out) {
  if (!std::filesystem::exists(matched)) throw DataError("matched file '" + matched.string() + "' does not exist");
  prepare_out(out);
  RunLog log;
  const auto& t = cfg.analysis_treatment();
  Table raw = apply_treatment(load_base(cfg, log), t, true, log).with_roles({t.name}, cfg.outcome);
  auto covs = balance_covariates(raw, t.covariates, log);
  std::string method(to_string(cfg.analysis.method));
  BalanceReport report;
  if (produces_pairs(cfg.analysis.method)) {
    report = balance_report(raw, read_pairs_csv(matched), t.name, covs, method);
  } else {
    auto s = read_subclassified_csv(matched, matched_schema(matched, raw), t.name);
    report = balance_report(raw, s, covs, method);
  }
  {
    std::ofstream csv(out / "balance.csv");
    write_balance_csv(report, csv);
    std::ofstream txt(out / "balance.txt");
    write_balance_text(report, txt);
  }
  log.add("balance", "covariates=" + join_list(covs));
  log.write(out / "run.log");
}

void cmd_ate(const Config& cfg, const std::filesystem::path& matched, const std::filesystem::path& out) {
  if (!cfg.outcome) throw ConfigError("outcome: is required for ate");
  if (!std::filesystem::exists(matched)) throw DataError("matched file '" + matched.string() + "' does not exist");
  prepare_out(out);
  RunLog log;
  const auto& t = cfg.analysis_treatment();
  Table raw = apply_treatment(load_base(cfg, log), t, true, log).with_roles({t.name}, cfg.outcome);
  double ate = 0.0;
  std::size_t treated = 0, control = 0, strata = 0;
  if (produces_pairs(cfg.analysis.method)) {
    auto pairs = read_pairs_csv(matched);
    ate = ate_matched(pairs, raw, *cfg.outcome);
    std::set<std::int64_t> ts, cs;
    for (const auto& p : pairs) {
      ts.insert(p.treated);
      cs.insert(p.control);
    }
    treated = ts.size();
    control = cs.size();
    strata = pairs.size();
  } else {
    auto s = read_subclassified_csv(matched, matched_schema(matched, raw), t.name);
    ate = ate_subclass(s, *cfg.outcome);
    treated = count_treated(s.units, t.name);
    control = s.rows() - treated;
    strata = s.subclass_count();
  }
  std::ofstream report(out / "ate.txt");
  if (!report) throw DataError("cannot write '" + (out / "ate.txt").string() + "'");
  report << "method\t" << to_string(cfg.analysis.method) << '\n';
  report << "treatment\t" << t.name << '\n';
  report << "outcome\t" << *cfg.outcome << '\n';
  report << "matched_treated\t" << treated << '\n';
  report << "matched_control\t" << control << '\n';
  report << (produces_pairs(cfg.analysis.method) ? "pairs\t" : "subclasses\t") << strata << '\n';
  report << "ate\t" << exact(ate) << '\n';
  if (cfg.analysis.ate_normalizer == AteNormalizer::TreatedFraction) {
    double fraction = static_cast<double>(count_treated(raw, t.name)) / static_cast<double>(raw.rows());
    report << "treated_fraction\t" << exact(fraction) << '\n';
    report << "ate_normalized\t" << exact(ate * fraction) << '\n';
  }
  log.add("ate", exact(ate));
  log.write(out / "run.log");
}

void cmd_prepare(const Config& cfg, const std::filesystem::path& out) {
  prepare_out(out);
  RunLog log;
  Table table = load_base(cfg, log);
  TreatmentSet ts;
  for (const auto& t : cfg.treatments) {
    table = apply_treatment(table, t, false, log);
    ts.treatments.push_back(t.name);
    ts.covariates[t.name] = coarsened(t.covariates);
  }
  table = table.with_roles(ts.treatments, cfg.outcome);
  auto store = prepare_database(table, ts, cfg.prepare_groups);
  log.add("partition", "groups=" + std::to_string(store.partition.groups.size()) +
                           " objective=" + exact(store.partition.objective));
  for (std::size_t i = 0; i < store.groups.size(); ++i) {
    const auto& g = store.groups[i];
    log.add("group", std::to_string(i) + " treatments=" + join_list(g.group.treatments) +
                         " shared=" + join_list(g.group.shared) + " rows=" + std::to_string(g.factored.units.rows()) +
                         " of " + std::to_string(table.rows()) + " cuboids=" + std::to_string(g.lattice.cuboids.size()));
  }
  save_store(store, out);
  log.write(out / "run.log");
}

void cmd_query(const std::filesystem::path& store_dir, const std::string& treatment, const std::string& where,
               const std::filesystem::path& out) {
  auto predicate = Predicate::parse(where);
  auto store = load_store(store_dir);
  prepare_out(out);
  RunLog log;
  auto matched = query_prepared(store, treatment, predicate);
  std::size_t nt = count_treated(matched.units, treatment);
  log.add("query", "treatment=" + treatment + " where=" + predicate.to_string());
  log.add("match", "rows=" + std::to_string(matched.rows()) + " treated=" + std::to_string(nt) +
                       " control=" + std::to_string(matched.rows() - nt) +
                       " subclasses=" + std::to_string(matched.subclass_count()));
  write_subclassified_csv(matched, out / "matched.csv");
  log.write(out / "run.log");
}

}  // namespace matchdb::cli
