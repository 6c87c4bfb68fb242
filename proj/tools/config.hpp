#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "matchdb/propensity.hpp"
#include "matchdb/table.hpp"

namespace matchdb::cli {

struct InputSpec {
  std::string name;
  std::filesystem::path path;  // resolved against the config file's directory
  Schema schema;
};

struct TreatmentSpec {
  std::string name;
  std::optional<std::string> column;      // existing binary column
  std::optional<std::string> treated_if;  // predicate deriving T = 1
  std::optional<std::string> control_if;  // predicate deriving T = 0
  std::vector<std::string> covariates;
};

// Either explicit cutpoints or an equal-width bucket count.
struct CutpointEntry {
  std::vector<double> cuts;
  std::optional<int> auto_buckets;
};

enum class Method { Cem, Exact, Nnmwr, Nnmnr, PsSubclass };
enum class DistanceKind { Propensity, Mahalanobis };
enum class AteNormalizer { None, TreatedFraction };

struct AnalysisSpec {
  Method method = Method::Cem;
  std::string treatment;  // defaults to the first treatment
  int k = 1;
  std::optional<double> caliper;
  int subclasses = 5;
  std::optional<std::pair<double, double>> trim;
  DistanceKind distance = DistanceKind::Propensity;
  double ridge = 0.0;
  AteNormalizer ate_normalizer = AteNormalizer::None;
};

struct PropensitySpec {
  std::vector<std::string> covariates;  // empty: the treatment's covariates
  LogisticConfig fit;
};

struct Config {
  std::filesystem::path source;
  std::vector<InputSpec> inputs;
  std::vector<JoinSpec> joins;
  std::vector<TreatmentSpec> treatments;
  std::vector<std::pair<std::string, CutpointEntry>> cutpoints;
  std::optional<std::string> outcome;
  AnalysisSpec analysis;
  PropensitySpec propensity;
  std::size_t prepare_groups = 2;

  const TreatmentSpec& treatment(const std::string& name) const;
  const TreatmentSpec& analysis_treatment() const { return treatment(analysis.treatment); }
};

std::string_view to_string(Method m);
bool uses_propensity(const AnalysisSpec& a);
bool produces_pairs(Method m);

// Parses and validates; throws ConfigError listing every problem found.
Config load_config(const std::filesystem::path& path);
Config parse_config(const std::string& text, const std::filesystem::path& base_dir);

}  // namespace matchdb::cli
