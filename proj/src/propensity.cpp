#include "matchdb/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "matchdb/error.hpp"
#include "matchdb/parallel.hpp"
#include "matchdb/table.hpp"

namespace matchdb {

namespace {

constexpr double kProbFloor = 0x1p-53;

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_real(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw DataError("model file: unparseable number '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(v)) throw DataError("model file: unparseable number '" + text + "'");
  return v;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) return out;
    start = tab + 1;
  }
}

}  // namespace

double sigmoid(double z) { return std::clamp(logistic(z), kProbFloor, 1.0 - kProbFloor); }

std::string Feature::name() const { return level ? column + "=" + *level : column; }

Design design_matrix(const Table& table, const LogisticModel& model) {
  Design d;
  d.rows = table.rows();
  d.cols = model.features.size();
  d.x.assign(d.rows * d.cols, 0.0);

  for (std::size_t j = 0; j < d.cols; ++j) {
    const auto& f = model.features[j];
    const auto& col = table.column(f.column);
    if (!f.level) {
      if (col.kind == ColumnKind::Categorical)
        throw ColumnError("model feature '" + f.column + "' is numeric but the column is categorical");
      for (std::size_t r = 0; r < d.rows; ++r) {
        double v = col.values[r];
        if (!std::isfinite(v)) throw DataError("non-finite value in feature '" + f.column + "'");
        d.x[r * d.cols + j] = (v - f.mean) / f.scale;
      }
      continue;
    }
    if (col.kind != ColumnKind::Categorical)
      throw ColumnError("model feature '" + f.name() + "' expects a categorical column");
    auto code = col.dictionary->find(*f.level);
    for (std::size_t r = 0; r < d.rows; ++r)
      d.x[r * d.cols + j] = (code && col.values[r] == *code) ? 1.0 : 0.0;
  }

  // Every categorical label must be either the reference level or a
  // modelled level.
  for (const auto& [column, ref] : model.reference_levels) {
    const auto& col = table.column(column);
    std::set<std::string> known{ref};
    for (const auto& f : model.features)
      if (f.column == column && f.level) known.insert(*f.level);
    for (std::size_t r = 0; r < d.rows; ++r) {
      const auto& label = col.dictionary->label(static_cast<std::int32_t>(col.values[r]));
      if (!known.contains(label))
        throw DataError("column '" + column + "' has level '" + label + "' unseen when the model was fitted");
    }
  }
  return d;
}

LogisticObjective::LogisticObjective(Design design, std::vector<double> labels, double l2)
    : design_(std::move(design)), labels_(std::move(labels)), l2_(l2) {
  if (labels_.size() != design_.rows) throw ArgumentError("label count does not match design rows");
}

double LogisticObjective::loss(std::span<const double> params) const {
  const std::size_t p = design_.cols;
  double total = 0.0;
  for (std::size_t r = 0; r < design_.rows; ++r) {
    double z = params[p];
    for (std::size_t j = 0; j < p; ++j) z += params[j] * design_.x[r * p + j];
    total += softplus(z) - labels_[r] * z;
  }
  double penalty = 0.0;
  for (std::size_t j = 0; j < p; ++j) penalty += params[j] * params[j];
  double n = static_cast<double>(std::max<std::size_t>(design_.rows, 1));
  return total / n + 0.5 * l2_ * penalty;
}

std::vector<double> LogisticObjective::gradient(std::span<const double> params) const {
  const std::size_t p = design_.cols;
  std::vector<double> g(p + 1, 0.0);
  for (std::size_t r = 0; r < design_.rows; ++r) {
    double z = params[p];
    for (std::size_t j = 0; j < p; ++j) z += params[j] * design_.x[r * p + j];
    double err = logistic(z) - labels_[r];
    for (std::size_t j = 0; j < p; ++j) g[j] += err * design_.x[r * p + j];
    g[p] += err;
  }
  double n = static_cast<double>(std::max<std::size_t>(design_.rows, 1));
  for (std::size_t j = 0; j <= p; ++j) g[j] /= n;
  for (std::size_t j = 0; j < p; ++j) g[j] += l2_ * params[j];
  return g;
}

LogisticModel fit_logistic(const Table& table, std::string_view treatment,
                           std::span<const std::string> covariates, const LogisticConfig& config) {
  const auto& t = table.column(treatment);
  if (t.kind != ColumnKind::Binary) throw ColumnError("treatment '" + std::string(treatment) + "' is not binary");
  std::size_t treated = static_cast<std::size_t>(std::count(t.values.begin(), t.values.end(), 1.0));
  if (treated == 0 || treated == table.rows())
    throw ArgumentError("propensity fit needs both treated and control rows (treated " + std::to_string(treated) +
                        " of " + std::to_string(table.rows()) + ")");
  if (config.max_iterations < 0 || config.l2 < 0 || !(config.learning_rate > 0))
    throw ArgumentError("invalid logistic configuration");

  LogisticModel model;
  model.treatment = std::string(treatment);
  const double n = static_cast<double>(table.rows());
  for (const auto& name : covariates) {
    const auto& col = table.column(name);
    if (col.kind == ColumnKind::Categorical) {
      std::vector<std::int32_t> present;
      std::vector<std::uint8_t> seen(col.dictionary->size(), 0);
      for (double v : col.values) seen[static_cast<std::size_t>(v)] = 1;
      for (std::size_t c = 0; c < seen.size(); ++c)
        if (seen[c]) present.push_back(static_cast<std::int32_t>(c));
      if (present.empty()) continue;
      model.reference_levels.emplace_back(name, col.dictionary->label(present.front()));
      for (std::size_t i = 1; i < present.size(); ++i)
        model.features.push_back(Feature{name, col.dictionary->label(present[i]), 0.0, 1.0});
      continue;
    }
    double mean = 0.0;
    for (double v : col.values) {
      if (!std::isfinite(v)) throw DataError("non-finite value in covariate '" + name + "'");
      mean += v;
    }
    mean /= n;
    double var = 0.0;
    for (double v : col.values) var += (v - mean) * (v - mean);
    double sd = std::sqrt(var / n);
    model.features.push_back(Feature{name, std::nullopt, mean, sd > 0 ? sd : 1.0});
  }
  model.weights.assign(model.features.size(), 0.0);

  LogisticObjective objective(design_matrix(table, model), t.values, config.l2);
  std::vector<double> params(objective.dimension(), 0.0);
  double loss = objective.loss(params);
  double step = config.learning_rate;
  std::vector<double> trial(params.size());

  int it = 0;
  for (; it < config.max_iterations; ++it) {
    auto g = objective.gradient(params);
    double gmax = 0.0, gnorm2 = 0.0;
    for (double v : g) {
      gmax = std::max(gmax, std::abs(v));
      gnorm2 += v * v;
    }
    if (gmax < config.tolerance) {
      model.converged = true;
      break;
    }
    model.loss_trace.push_back(loss);
    // Armijo backtracking; a step is accepted only if the loss does not rise.
    double t_step = step;
    double trial_loss = loss;
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      for (std::size_t j = 0; j < params.size(); ++j) trial[j] = params[j] - t_step * g[j];
      trial_loss = objective.loss(trial);
      if (trial_loss <= loss - 0.5 * t_step * gnorm2) {
        accepted = true;
        break;
      }
      t_step *= 0.5;
    }
    if (!accepted) break;
    params = trial;
    loss = trial_loss;
    step = std::min(config.learning_rate * 16.0, t_step * 2.0);
  }
  model.loss_trace.push_back(loss);
  model.iterations = it;
  if (!model.converged && config.max_iterations > 0) {
    auto g = objective.gradient(params);
    model.converged = std::ranges::all_of(g, [&](double v) { return std::abs(v) < config.tolerance; });
  }
  for (std::size_t j = 0; j < model.weights.size(); ++j) model.weights[j] = params[j];
  model.intercept = params.back();
  for (double w : model.weights)
    if (!std::isfinite(w)) throw Error("propensity fit diverged");
  return model;
}

Table score(const LogisticModel& model, const Table& table, const std::string& ps_column) {
  Design d = design_matrix(table, model);
  std::vector<double> ps(d.rows);
  parallel_for(d.rows, [&](std::size_t b, std::size_t e) {
    for (std::size_t r = b; r < e; ++r) {
      double z = model.intercept;
      for (std::size_t j = 0; j < d.cols; ++j) z += model.weights[j] * d(r, j);
      ps[r] = sigmoid(z);
    }
  });
  return table.with_column(Column::numeric(ps_column, std::move(ps)));
}

Table trim(const Table& table, double lo, double hi, std::string_view ps_column) {
  if (!(lo >= 0.0 && lo < hi && hi <= 1.0))
    throw ArgumentError("trim bounds must satisfy 0 <= lo < hi <= 1");
  if (!table.has(ps_column)) throw ColumnError("trim needs a propensity column '" + std::string(ps_column) + "'");
  auto ps = table.values(ps_column);
  std::vector<std::uint8_t> keep(ps.size());
  for (std::size_t r = 0; r < ps.size(); ++r) keep[r] = ps[r] >= lo && ps[r] <= hi;
  return table.filter(keep);
}

void save_model(const LogisticModel& model, std::ostream& out) {
  out << "matchdb-logistic\t1\n";
  out << "treatment\t" << model.treatment << '\n';
  out << "intercept\t" << format17(model.intercept) << '\n';
  for (const auto& [column, level] : model.reference_levels) out << "reference\t" << column << '\t' << level << '\n';
  for (std::size_t j = 0; j < model.features.size(); ++j) {
    const auto& f = model.features[j];
    if (f.level)
      out << "level\t" << f.column << '\t' << *f.level << '\t' << format17(model.weights[j]) << '\n';
    else
      out << "numeric\t" << f.column << '\t' << format17(f.mean) << '\t' << format17(f.scale) << '\t'
          << format17(model.weights[j]) << '\n';
  }
}

LogisticModel load_model(std::istream& in) {
  LogisticModel model;
  std::string line;
  if (!std::getline(in, line) || line != "matchdb-logistic\t1") throw DataError("model file: bad header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_tabs(line);
    const auto& key = f[0];
    if (key == "treatment" && f.size() == 2) {
      model.treatment = f[1];
    } else if (key == "intercept" && f.size() == 2) {
      model.intercept = parse_real(f[1]);
    } else if (key == "reference" && f.size() == 3) {
      model.reference_levels.emplace_back(f[1], f[2]);
    } else if (key == "level" && f.size() == 4) {
      model.features.push_back(Feature{f[1], f[2], 0.0, 1.0});
      model.weights.push_back(parse_real(f[3]));
    } else if (key == "numeric" && f.size() == 5) {
      model.features.push_back(Feature{f[1], std::nullopt, parse_real(f[2]), parse_real(f[3])});
      model.weights.push_back(parse_real(f[4]));
    } else {
      throw DataError("model file: unrecognized line '" + line + "'");
    }
  }
  return model;
}

}  // namespace matchdb
