#include "config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"
#include "matchdb/error.hpp"
#include "matchdb/predicate.hpp"

namespace matchdb::cli {

using json = nlohmann::ordered_json;

namespace {

class Reader {
 public:
  std::vector<std::string> errors;

  void fail(const std::string& field, const std::string& message) { errors.push_back(field + ": " + message); }

  // Rejects keys outside `allowed`, which catches misspelled fields.
  void keys(const json& obj, const std::string& field, std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, value] : obj.items()) {
      bool ok = false;
      for (auto a : allowed) ok = ok || key == a;
      if (!ok) fail(field.empty() ? key : field + "." + key, "unknown field");
    }
  }

  std::optional<std::string> string(const json& obj, const std::string& key, const std::string& field,
                                    bool required) {
    if (!obj.contains(key)) {
      if (required) fail(field, "is required");
      return std::nullopt;
    }
    if (!obj[key].is_string()) {
      fail(field, "must be a string");
      return std::nullopt;
    }
    return obj[key].get<std::string>();
  }

  std::optional<double> number(const json& obj, const std::string& key, const std::string& field) {
    if (!obj.contains(key)) return std::nullopt;
    if (!obj[key].is_number()) {
      fail(field, "must be a number");
      return std::nullopt;
    }
    return obj[key].get<double>();
  }

  std::optional<int> integer(const json& obj, const std::string& key, const std::string& field) {
    if (!obj.contains(key)) return std::nullopt;
    if (!obj[key].is_number_integer()) {
      fail(field, "must be an integer");
      return std::nullopt;
    }
    return obj[key].get<int>();
  }

  std::vector<std::string> strings(const json& v, const std::string& field) {
    std::vector<std::string> out;
    if (!v.is_array()) {
      fail(field, "must be a list of strings");
      return out;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string())
        fail(field + "[" + std::to_string(i) + "]", "must be a string");
      else
        out.push_back(v[i].get<std::string>());
    }
    return out;
  }
};

std::optional<Method> parse_method(std::string_view s) {
  if (s == "cem") return Method::Cem;
  if (s == "exact") return Method::Exact;
  if (s == "nnmwr") return Method::Nnmwr;
  if (s == "nnmnr") return Method::Nnmnr;
  if (s == "psSubclass") return Method::PsSubclass;
  return std::nullopt;
}

void check_predicate(Reader& r, const std::string& text, const std::string& field, const std::set<std::string>& known) {
  try {
    auto p = Predicate::parse(text);
    for (const auto& c : p.columns())
      if (!known.contains(c)) r.fail(field, "predicate refers to unknown column '" + c + "'");
  } catch (const Error& e) {
    r.fail(field, e.what());
  }
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Cem: return "cem";
    case Method::Exact: return "exact";
    case Method::Nnmwr: return "nnmwr";
    case Method::Nnmnr: return "nnmnr";
    case Method::PsSubclass: return "psSubclass";
  }
  return "";
}

bool produces_pairs(Method m) { return m == Method::Nnmwr || m == Method::Nnmnr; }

bool uses_propensity(const AnalysisSpec& a) {
  return a.method == Method::PsSubclass || (produces_pairs(a.method) && a.distance == DistanceKind::Propensity);
}

const TreatmentSpec& Config::treatment(const std::string& name) const {
  for (const auto& t : treatments)
    if (t.name == name) return t;
  throw ConfigError("unknown treatment '" + name + "'");
}

Config parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config must be a JSON object");

  Reader r;
  Config cfg;
  r.keys(root, "", {"inputs", "joins", "treatments", "cutpoints", "outcome", "analysis", "propensity", "prepare"});

  std::set<std::string> known;  // every column name any input declares, plus derived treatments
  std::set<std::string> relation_names;
  if (!root.contains("inputs") || !root["inputs"].is_array() || root["inputs"].empty()) {
    r.fail("inputs", "must be a non-empty list");
  } else {
    for (std::size_t i = 0; i < root["inputs"].size(); ++i) {
      const auto& in = root["inputs"][i];
      std::string field = "inputs[" + std::to_string(i) + "]";
      if (!in.is_object()) {
        r.fail(field, "must be an object");
        continue;
      }
      r.keys(in, field, {"name", "path", "id", "columns"});
      InputSpec spec;
      auto path = r.string(in, "path", field + ".path", true);
      if (path) {
        spec.path = base_dir / *path;
        if (!std::filesystem::exists(spec.path)) r.fail(field + ".path", "file '" + spec.path.string() + "' does not exist");
      }
      spec.name = r.string(in, "name", field + ".name", false).value_or(path ? std::filesystem::path(*path).stem().string() : "");
      if (!relation_names.insert(spec.name).second) r.fail(field + ".name", "duplicate input name '" + spec.name + "'");
      spec.schema.id_column = r.string(in, "id", field + ".id", false).value_or("id");
      known.insert(spec.schema.id_column);
      if (!in.contains("columns") || !in["columns"].is_object()) {
        r.fail(field + ".columns", "must map column names to numeric | categorical | binary");
      } else {
        for (const auto& [col, kind] : in["columns"].items()) {
          std::string cf = field + ".columns." + col;
          if (!kind.is_string()) {
            r.fail(cf, "must be numeric, categorical or binary");
            continue;
          }
          try {
            spec.schema.kinds[col] = parse_column_kind(kind.get<std::string>());
            known.insert(col);
          } catch (const Error&) {
            r.fail(cf, "unknown column kind '" + kind.get<std::string>() + "' (expected numeric, categorical or binary)");
          }
        }
      }
      cfg.inputs.push_back(std::move(spec));
    }
  }

  if (root.contains("joins")) {
    if (!root["joins"].is_array()) {
      r.fail("joins", "must be a list");
    } else {
      for (std::size_t i = 0; i < root["joins"].size(); ++i) {
        const auto& j = root["joins"][i];
        std::string field = "joins[" + std::to_string(i) + "]";
        if (!j.is_object()) {
          r.fail(field, "must be an object");
          continue;
        }
        r.keys(j, field, {"parent", "child", "parent_key", "child_key"});
        JoinSpec spec;
        spec.parent = r.string(j, "parent", field + ".parent", true).value_or("");
        spec.child = r.string(j, "child", field + ".child", true).value_or("");
        spec.parent_key = r.string(j, "parent_key", field + ".parent_key", true).value_or("");
        spec.child_key = r.string(j, "child_key", field + ".child_key", false).value_or(spec.parent_key);
        for (const auto* rel : {&spec.parent, &spec.child})
          if (!rel->empty() && !relation_names.contains(*rel)) r.fail(field, "unknown input '" + *rel + "'");
        cfg.joins.push_back(std::move(spec));
      }
      if (!cfg.inputs.empty() && cfg.joins.size() + 1 != cfg.inputs.size())
        r.fail("joins", "need exactly one join per input after the first (" + std::to_string(cfg.inputs.size() - 1) +
                            " expected, " + std::to_string(cfg.joins.size()) + " given)");
    }
  } else if (cfg.inputs.size() > 1) {
    r.fail("joins", "is required when more than one input is given");
  }

  std::set<std::string> treatment_names;
  if (!root.contains("treatments") || !root["treatments"].is_array() || root["treatments"].empty()) {
    r.fail("treatments", "must be a non-empty list");
  } else {
    for (std::size_t i = 0; i < root["treatments"].size(); ++i) {
      const auto& t = root["treatments"][i];
      std::string field = "treatments[" + std::to_string(i) + "]";
      if (!t.is_object()) {
        r.fail(field, "must be an object");
        continue;
      }
      r.keys(t, field, {"name", "column", "treated_if", "control_if", "covariates"});
      TreatmentSpec spec;
      spec.column = r.string(t, "column", field + ".column", false);
      spec.treated_if = r.string(t, "treated_if", field + ".treated_if", false);
      spec.control_if = r.string(t, "control_if", field + ".control_if", false);
      spec.name = r.string(t, "name", field + ".name", !spec.column).value_or(spec.column.value_or(""));
      if (spec.column && (spec.treated_if || spec.control_if))
        r.fail(field, "give either column or treated_if/control_if, not both");
      if (!spec.column && (!spec.treated_if || !spec.control_if))
        r.fail(field, "needs a binary column or both treated_if and control_if");
      if (spec.column && !known.contains(*spec.column))
        r.fail(field + ".column", "unknown column '" + *spec.column + "'");
      if (spec.column && *spec.column != spec.name)
        r.fail(field + ".name", "must equal the column name for a column treatment");
      if (!spec.column && known.contains(spec.name))
        r.fail(field + ".name", "derived treatment '" + spec.name + "' clashes with an input column");
      if (!treatment_names.insert(spec.name).second) r.fail(field + ".name", "duplicate treatment '" + spec.name + "'");
      if (spec.treated_if) check_predicate(r, *spec.treated_if, field + ".treated_if", known);
      if (spec.control_if) check_predicate(r, *spec.control_if, field + ".control_if", known);
      if (!t.contains("covariates")) {
        r.fail(field + ".covariates", "is required");
      } else {
        spec.covariates = r.strings(t["covariates"], field + ".covariates");
        if (t["covariates"].is_array() && spec.covariates.empty()) r.fail(field + ".covariates", "must not be empty");
        for (const auto& c : spec.covariates)
          if (!known.contains(c)) r.fail(field + ".covariates", "unknown column '" + c + "'");
      }
      cfg.treatments.push_back(std::move(spec));
    }
  }
  for (const auto& t : cfg.treatments)
    if (!t.column) known.insert(t.name);

  if (root.contains("cutpoints")) {
    if (!root["cutpoints"].is_object()) {
      r.fail("cutpoints", "must map covariates to a list of cutpoints or {\"auto\": k}");
    } else {
      for (const auto& [col, v] : root["cutpoints"].items()) {
        std::string field = "cutpoints." + col;
        if (!known.contains(col)) r.fail(field, "unknown column '" + col + "'");
        CutpointEntry entry;
        if (v.is_array()) {
          bool ok = true;
          for (const auto& x : v) ok = ok && x.is_number();
          if (!ok) {
            r.fail(field, "cutpoints must be numbers");
          } else {
            for (const auto& x : v) entry.cuts.push_back(x.get<double>());
            for (std::size_t i = 1; i < entry.cuts.size(); ++i)
              if (!(entry.cuts[i - 1] < entry.cuts[i])) {
                r.fail(field, "cutpoints must be strictly increasing");
                break;
              }
          }
        } else if (v.is_object()) {
          r.keys(v, field, {"auto"});
          auto k = r.integer(v, "auto", field + ".auto");
          if (!k)
            r.fail(field + ".auto", "is required");
          else if (*k < 1)
            r.fail(field + ".auto", "bucket count must be >= 1");
          entry.auto_buckets = k;
        } else {
          r.fail(field, "must be a list of cutpoints or {\"auto\": k}");
        }
        cfg.cutpoints.emplace_back(col, std::move(entry));
      }
    }
  }

  cfg.outcome = r.string(root, "outcome", "outcome", false);
  if (cfg.outcome && !known.contains(*cfg.outcome)) r.fail("outcome", "unknown column '" + *cfg.outcome + "'");

  json analysis = root.value("analysis", json::object());
  if (!analysis.is_object()) {
    r.fail("analysis", "must be an object");
    analysis = json::object();
  }
  r.keys(analysis, "analysis", {"method", "treatment", "k", "caliper", "subclasses", "trim", "distance", "ridge", "ate_normalizer"});
  auto& a = cfg.analysis;
  if (auto m = r.string(analysis, "method", "analysis.method", false)) {
    if (auto parsed = parse_method(*m))
      a.method = *parsed;
    else
      r.fail("analysis.method", "unknown method '" + *m + "' (expected cem, exact, nnmwr, nnmnr or psSubclass)");
  }
  a.treatment = r.string(analysis, "treatment", "analysis.treatment", false)
                    .value_or(cfg.treatments.empty() ? "" : cfg.treatments.front().name);
  if (!a.treatment.empty() && !treatment_names.contains(a.treatment))
    r.fail("analysis.treatment", "unknown treatment '" + a.treatment + "'");
  if (auto k = r.integer(analysis, "k", "analysis.k")) {
    if (*k < 1) r.fail("analysis.k", "must be >= 1");
    a.k = *k;
  }
  a.caliper = r.number(analysis, "caliper", "analysis.caliper");
  if (a.caliper && !(*a.caliper > 0)) r.fail("analysis.caliper", "must be > 0");
  if (produces_pairs(a.method) && !a.caliper)
    r.fail("analysis.caliper", std::string("is required for ") + std::string(to_string(a.method)));
  if (auto n = r.integer(analysis, "subclasses", "analysis.subclasses")) {
    if (*n < 1) r.fail("analysis.subclasses", "must be >= 1");
    a.subclasses = *n;
  }
  if (analysis.contains("trim")) {
    const auto& t = analysis["trim"];
    if (!t.is_array() || t.size() != 2 || !t[0].is_number() || !t[1].is_number()) {
      r.fail("analysis.trim", "must be [lo, hi]");
    } else {
      double lo = t[0].get<double>(), hi = t[1].get<double>();
      if (!(0.0 <= lo && lo < hi && hi <= 1.0)) r.fail("analysis.trim", "needs 0 <= lo < hi <= 1");
      a.trim = std::pair{lo, hi};
    }
  }
  if (auto d = r.string(analysis, "distance", "analysis.distance", false)) {
    if (*d == "propensity")
      a.distance = DistanceKind::Propensity;
    else if (*d == "mahalanobis")
      a.distance = DistanceKind::Mahalanobis;
    else
      r.fail("analysis.distance", "unknown distance '" + *d + "' (expected propensity or mahalanobis)");
  }
  if (auto ridge = r.number(analysis, "ridge", "analysis.ridge")) {
    if (*ridge < 0) r.fail("analysis.ridge", "must be >= 0");
    a.ridge = *ridge;
  }
  if (auto n = r.string(analysis, "ate_normalizer", "analysis.ate_normalizer", false)) {
    if (*n == "none")
      a.ate_normalizer = AteNormalizer::None;
    else if (*n == "treated_fraction")
      a.ate_normalizer = AteNormalizer::TreatedFraction;
    else
      r.fail("analysis.ate_normalizer", "unknown normalizer '" + *n + "' (expected none or treated_fraction)");
  }
  if (a.trim && !uses_propensity(a)) r.fail("analysis.trim", "applies only to propensity-based methods");

  if (root.contains("propensity")) {
    const auto& p = root["propensity"];
    if (!p.is_object()) {
      r.fail("propensity", "must be an object");
    } else {
      r.keys(p, "propensity", {"covariates", "learning_rate", "max_iterations", "l2", "tolerance"});
      if (p.contains("covariates")) {
        cfg.propensity.covariates = r.strings(p["covariates"], "propensity.covariates");
        for (const auto& c : cfg.propensity.covariates)
          if (!known.contains(c)) r.fail("propensity.covariates", "unknown column '" + c + "'");
      }
      auto& fit = cfg.propensity.fit;
      if (auto v = r.number(p, "learning_rate", "propensity.learning_rate")) {
        if (!(*v > 0)) r.fail("propensity.learning_rate", "must be > 0");
        fit.learning_rate = *v;
      }
      if (auto v = r.integer(p, "max_iterations", "propensity.max_iterations")) {
        if (*v < 1) r.fail("propensity.max_iterations", "must be >= 1");
        fit.max_iterations = *v;
      }
      if (auto v = r.number(p, "l2", "propensity.l2")) {
        if (*v < 0) r.fail("propensity.l2", "must be >= 0");
        fit.l2 = *v;
      }
      if (auto v = r.number(p, "tolerance", "propensity.tolerance")) {
        if (!(*v > 0)) r.fail("propensity.tolerance", "must be > 0");
        fit.tolerance = *v;
      }
    }
  }

  if (root.contains("prepare")) {
    const auto& p = root["prepare"];
    if (!p.is_object()) {
      r.fail("prepare", "must be an object");
    } else {
      r.keys(p, "prepare", {"groups"});
      if (auto g = r.integer(p, "groups", "prepare.groups")) {
        if (*g < 1) r.fail("prepare.groups", "must be >= 1");
        cfg.prepare_groups = static_cast<std::size_t>(std::max(*g, 1));
      }
    }
  }
  if (!cfg.treatments.empty() && cfg.prepare_groups > cfg.treatments.size() && root.contains("prepare"))
    r.fail("prepare.groups", "exceeds the number of treatments (" + std::to_string(cfg.treatments.size()) + ")");

  if (!r.errors.empty()) {
    std::string msg = "invalid config (" + std::to_string(r.errors.size()) + " error" +
                      (r.errors.size() == 1 ? "" : "s") + "):";
    for (const auto& e : r.errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  Config cfg = parse_config(ss.str(), path.parent_path());
  cfg.source = path;
  return cfg;
}

}  // namespace matchdb::cli
