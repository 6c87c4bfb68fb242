#include "matchdb/matching.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "matchdb/error.hpp"
#include "matchdb/parallel.hpp"
#include "matchdb/table.hpp"

namespace matchdb {

double mahalanobis(std::span<const double> a, std::span<const double> b, const Eigen::MatrixXd& inverse_covariance) {
  const auto d = static_cast<Eigen::Index>(a.size());
  if (a.size() != b.size() || inverse_covariance.rows() != d || inverse_covariance.cols() != d)
    throw ArgumentError("mahalanobis: dimension mismatch (" + std::to_string(a.size()) + ", " +
                        std::to_string(b.size()) + ", " + std::to_string(inverse_covariance.rows()) + "x" +
                        std::to_string(inverse_covariance.cols()) + ")");
  double q = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    double di = a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < d; ++j)
      q += di * inverse_covariance(i, j) * (a[static_cast<std::size_t>(j)] - b[static_cast<std::size_t>(j)]);
  }
  return q;
}

Eigen::MatrixXd covariance_inverse(const Table& table, std::span<const std::string> covariates, double ridge) {
  const std::size_t n = table.rows();
  const auto d = static_cast<Eigen::Index>(covariates.size());
  if (n < 2) throw ArgumentError("covariance needs at least 2 rows");
  if (ridge < 0) throw ArgumentError("ridge must be non-negative");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const auto& col = table.column(covariates[static_cast<std::size_t>(j)]);
    if (col.kind == ColumnKind::Categorical)
      throw ColumnError("mahalanobis covariate '" + col.name + "' is categorical");
    for (std::size_t r = 0; r < n; ++r) x(static_cast<Eigen::Index>(r), j) = col.values[r];
  }
  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  cov.diagonal().array() += ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw ArgumentError("covariance matrix is singular; use a positive ridge");
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(d, d));
  inv = 0.5 * (inv + inv.transpose());
  if (!inv.allFinite()) throw ArgumentError("covariance matrix is singular; use a positive ridge");
  return inv;
}

namespace {

struct Candidate {
  double distance;
  std::int64_t treated;
  std::int64_t control;
  std::uint32_t control_index;
};

// Distances between treated and control rows under one DistanceSpec.
class PairDistance {
 public:
  PairDistance(const Table& table, const DistanceSpec& spec) {
    std::visit([&](const auto& s) { init(table, s); }, spec);
  }

  // nullopt when the pair is never admissible.
  std::optional<double> operator()(std::size_t a, std::size_t b) const {
    switch (kind_) {
      case Kind::Scalar: return std::abs(scalar_[a] - scalar_[b]);
      case Kind::Coarsened:
        for (auto col : columns_)
          if (col[a] != col[b]) return std::nullopt;
        return 0.0;
      case Kind::Quadratic: {
        double q = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
          double di = columns_[i][a] - columns_[i][b];
          for (std::size_t j = 0; j < dim_; ++j) q += di * inverse_[i * dim_ + j] * (columns_[j][a] - columns_[j][b]);
        }
        return q;
      }
    }
    return std::nullopt;
  }

 private:
  void init(const Table& t, const PropensityDistance& s) {
    if (!t.has(s.column)) throw ColumnError("propensity distance needs column '" + s.column + "'");
    kind_ = Kind::Scalar;
    scalar_ = t.values(s.column);
  }
  void init(const Table& t, const CoarsenedMatchDistance& s) {
    kind_ = Kind::Coarsened;
    for (const auto& c : s.columns) columns_.push_back(t.values(c));
  }
  void init(const Table& t, const MahalanobisDistance& s) {
    kind_ = Kind::Quadratic;
    dim_ = s.covariates.size();
    const auto& m = s.inverse_covariance;
    if (static_cast<std::size_t>(m.rows()) != dim_ || static_cast<std::size_t>(m.cols()) != dim_)
      throw ArgumentError("mahalanobis: inverse covariance is " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + " for " + std::to_string(dim_) + " covariates");
    if (!m.isApprox(m.transpose(), 1e-12) || Eigen::LLT<Eigen::MatrixXd>(m).info() != Eigen::Success)
      throw ArgumentError("mahalanobis: inverse covariance is not symmetric positive definite");
    for (const auto& c : s.covariates) {
      if (t.column(c).kind == ColumnKind::Categorical)
        throw ColumnError("mahalanobis covariate '" + c + "' is categorical");
      columns_.push_back(t.values(c));
    }
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j < dim_; ++j)
        inverse_.push_back(m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  }

  enum class Kind { Scalar, Coarsened, Quadratic } kind_ = Kind::Scalar;
  std::span<const double> scalar_;
  std::vector<std::span<const double>> columns_;
  std::vector<double> inverse_;
  std::size_t dim_ = 0;
};

struct Sides {
  std::vector<std::size_t> treated;
  std::vector<std::size_t> control;
};

Sides split_treatment(const Table& table) {
  auto t = table.values(table.treatment());
  Sides s;
  for (std::size_t r = 0; r < t.size(); ++r) (t[r] == 1.0 ? s.treated : s.control).push_back(r);
  return s;
}

void check_args(int k, double caliper) {
  if (k < 1) throw ArgumentError("k must be >= 1");
  if (!(caliper > 0)) throw ArgumentError("caliper must be > 0");
}

bool by_distance_then_control(const Candidate& a, const Candidate& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  return a.control < b.control;
}

// Admissible candidates for treated rows [begin, end), grouped by treated row.
std::vector<Candidate> candidates(const Table& table, const PairDistance& dist, const Sides& sides,
                                  std::size_t begin, std::size_t end, double caliper) {
  auto ids = table.ids();
  std::vector<Candidate> out;
  for (std::size_t i = begin; i < end; ++i) {
    std::size_t tr = sides.treated[i];
    for (std::size_t j = 0; j < sides.control.size(); ++j) {
      std::size_t cr = sides.control[j];
      auto d = dist(tr, cr);
      if (d && *d < caliper) out.push_back(Candidate{*d, ids[tr], ids[cr], static_cast<std::uint32_t>(j)});
    }
  }
  return out;
}

void sort_output(MatchedPairs& pairs) {
  std::sort(pairs.begin(), pairs.end(), [](const MatchedPair& a, const MatchedPair& b) {
    if (a.treated != b.treated) return a.treated < b.treated;
    return a.order < b.order;
  });
}

}  // namespace

MatchedPairs nnm_with_replacement(const Table& table, const DistanceSpec& distance, int k, double caliper) {
  check_args(k, caliper);
  PairDistance dist(table, distance);
  Sides sides = split_treatment(table);
  auto ids = table.ids();

  std::vector<MatchedPairs> per_treated(sides.treated.size());
  parallel_for(sides.treated.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      auto cand = candidates(table, dist, sides, i, i + 1, caliper);
      std::size_t m = std::min(cand.size(), static_cast<std::size_t>(k));
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(m), cand.end(),
                        by_distance_then_control);
      auto& out = per_treated[i];
      for (std::size_t r = 0; r < m; ++r)
        out.push_back(MatchedPair{ids[sides.treated[i]], cand[r].control, cand[r].distance, static_cast<int>(r + 1)});
    }
  }, 16);

  MatchedPairs pairs;
  for (auto& p : per_treated) pairs.insert(pairs.end(), p.begin(), p.end());
  sort_output(pairs);
  return pairs;
}

MatchedPairs nnm_without_replacement(const Table& table, const DistanceSpec& distance, int k, double caliper) {
  check_args(k, caliper);
  PairDistance dist(table, distance);
  Sides sides = split_treatment(table);

  const std::size_t n_t = sides.treated.size();
  std::size_t workers = std::max<std::size_t>(1, std::min(threads(), n_t));
  std::size_t chunk = (n_t + workers - 1) / workers;
  std::vector<std::vector<Candidate>> parts(workers);
  parallel_for(workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t w = b; w < e; ++w) {
      std::size_t lo = std::min(n_t, w * chunk), hi = std::min(n_t, lo + chunk);
      parts[w] = candidates(table, dist, sides, lo, hi, caliper);
    }
  }, 1);
  std::vector<Candidate> all;
  for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
  std::sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.treated != b.treated) return a.treated < b.treated;
    return a.control < b.control;
  });

  std::vector<std::uint8_t> used(sides.control.size(), 0);
  std::unordered_map<std::int64_t, int> matched;
  MatchedPairs pairs;
  for (const auto& c : all) {
    if (used[c.control_index]) continue;
    int& count = matched[c.treated];
    if (count >= k) continue;
    used[c.control_index] = 1;
    ++count;
    pairs.push_back(MatchedPair{c.treated, c.control, c.distance, count});
  }
  sort_output(pairs);
  return pairs;
}

void write_pairs_csv(const MatchedPairs& pairs, std::ostream& out) {
  out << "tID,cID,distance,order\n";
  for (const auto& p : pairs)
    out << p.treated << ',' << p.control << ',' << format_double(p.distance) << ',' << p.order << '\n';
}

void write_pairs_csv(const MatchedPairs& pairs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_pairs_csv(pairs, out);
}

MatchedPairs read_pairs_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("tID,cID,distance,order", 0) != 0)
    throw DataError(path.string() + ": expected header tID,cID,distance,order");
  MatchedPairs pairs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    MatchedPair p;
    char c1 = 0, c2 = 0;
    if (!(ss >> p.treated >> c1) || c1 != ',' || !(ss >> p.control >> c2) || c2 != ',')
      throw DataError(path.string() + ": line " + std::to_string(line_no) + " is malformed");
    std::string rest;
    std::getline(ss, rest);
    auto comma = rest.rfind(',');
    if (comma == std::string::npos) throw DataError(path.string() + ": line " + std::to_string(line_no) + " is malformed");
    try {
      p.distance = std::stod(rest.substr(0, comma));
      p.order = std::stoi(rest.substr(comma + 1));
    } catch (const std::exception&) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + " is malformed");
    }
    pairs.push_back(p);
  }
  return pairs;
}

}  // namespace matchdb
