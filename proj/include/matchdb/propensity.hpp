#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace matchdb {

class Table;

struct LogisticConfig {
  double learning_rate = 1.0;  // initial step of the backtracking search
  int max_iterations = 500;
  double l2 = 1e-6;
  double tolerance = 1e-8;  // on the gradient max-norm
};

// One model input. Numeric and binary covariates are standardized with
// (x - mean) / scale; a categorical level is a 0/1 indicator.
struct Feature {
  std::string column;
  std::optional<std::string> level;
  double mean = 0.0;
  double scale = 1.0;

  std::string name() const;
};

struct LogisticModel {
  std::string treatment;
  std::vector<Feature> features;
  std::vector<double> weights;  // aligned with features
  double intercept = 0.0;
  // Dropped first level of each categorical covariate.
  std::vector<std::pair<std::string, std::string>> reference_levels;

  int iterations = 0;
  bool converged = false;
  std::vector<double> loss_trace;  // loss before each accepted step, then final; not serialized
};

// Row-major standardized design matrix.
struct Design {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> x;
  double operator()(std::size_t r, std::size_t c) const { return x[r * cols + c]; }
};

// Builds the inputs for `features`; throws on categorical levels not known
// to the model.
Design design_matrix(const Table& table, const LogisticModel& model);

// Mean negative log-likelihood plus (l2 / 2) * |w|^2. Parameters are laid
// out as [weights..., intercept]; the intercept is not penalized.
class LogisticObjective {
 public:
  LogisticObjective(Design design, std::vector<double> labels, double l2);

  std::size_t dimension() const { return design_.cols + 1; }
  double loss(std::span<const double> params) const;
  std::vector<double> gradient(std::span<const double> params) const;

 private:
  Design design_;
  std::vector<double> labels_;
  double l2_;
};

// Logistic function, kept strictly inside (0, 1).
double sigmoid(double z);

// Full-batch gradient descent with backtracking from zero initialization.
LogisticModel fit_logistic(const Table& table, std::string_view treatment,
                           std::span<const std::string> covariates, const LogisticConfig& config = {});

// Adds (or replaces) a numeric propensity column.
Table score(const LogisticModel& model, const Table& table, const std::string& ps_column = "ps");

// Keeps rows with lo <= ps <= hi.
Table trim(const Table& table, double lo, double hi, std::string_view ps_column = "ps");

void save_model(const LogisticModel& model, std::ostream& out);
LogisticModel load_model(std::istream& in);

}  // namespace matchdb
