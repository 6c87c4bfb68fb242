#include "matchdb/prepared.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "matchdb/error.hpp"

namespace matchdb {

namespace {

constexpr std::string_view kSuperColumn = "supersubclass";

std::string join_list(std::span<const std::string> items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ',';
    out += s;
  }
  return out;
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> split_list(std::string_view text) {
  if (text.empty()) return {};
  return split(text, ',');
}

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_number(std::string_view text, const std::string& where) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw DataError(where + ": cannot parse number '" + std::string(text) + "'");
  return v;
}

std::int64_t parse_int(std::string_view text, const std::string& where) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw DataError(where + ": cannot parse integer '" + std::string(text) + "'");
  return v;
}

void check_name(const std::string& name) {
  if (name.find_first_of(",\t\n") != std::string::npos)
    throw ArgumentError("column name '" + name + "' cannot be stored: it contains a separator");
}

std::vector<std::vector<std::string>> lattice_subsets(const TreatmentSet& ts, const TreatmentGroup& g) {
  std::vector<std::vector<std::string>> subsets;
  if (g.treatments.size() > 1) subsets.push_back(g.all);
  for (const auto& t : g.treatments) subsets.push_back(ts.covariates_of(t));
  return subsets;
}

}  // namespace

const PreparedGroup& PreparedStore::group_of(std::string_view treatment) const {
  for (const auto& g : groups)
    if (std::ranges::find(g.group.treatments, treatment) != g.group.treatments.end()) return g;
  auto names = treatment_names();
  throw ArgumentError("unknown treatment '" + std::string(treatment) + "'; available: " + join_list(names));
}

std::vector<std::string> PreparedStore::treatment_names() const {
  std::vector<std::string> out;
  for (const auto& g : groups) out.insert(out.end(), g.group.treatments.begin(), g.group.treatments.end());
  return out;
}

std::string subset_hash(std::span<const std::string> covariates) {
  std::vector<std::string> sorted(covariates.begin(), covariates.end());
  std::sort(sorted.begin(), sorted.end());
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0) {
      h ^= 0x1fu;
      h *= 1099511628211ULL;
    }
    for (unsigned char ch : sorted[i]) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

PreparedStore prepare_database(const Table& table, const TreatmentSet& ts, std::size_t n) {
  PreparedStore store;
  store.treatments = ts;
  store.partition = partition_treatments(ts, table, n);

  std::vector<std::vector<std::string>> shared_sets;
  for (const auto& g : store.partition.groups) shared_sets.push_back(g.shared);
  CuboidLattice base = materialize_cuboids(table, shared_sets, ts.treatments);

  for (const auto& g : store.partition.groups) {
    const Cuboid* c = base.find(g.shared);
    std::vector<std::uint8_t> keep(c->cells, 0);
    for (const auto& t : g.treatments) {
      auto ti = base.treatment_index(t);
      for (std::size_t i = 0; i < c->cells; ++i) keep[i] |= c->min_t[ti][i] != c->max_t[ti][i];
    }
    std::vector<std::size_t> rows;
    std::vector<std::int64_t> super;
    for (std::size_t r = 0; r < c->cell_of_row.size(); ++r) {
      auto cell = c->cell_of_row[r];
      if (!keep[cell]) continue;
      rows.push_back(r);
      super.push_back(c->max_id[cell]);
    }
    PreparedGroup pg;
    pg.group = g;
    pg.factored = FactoredTable{table.take(rows), std::move(super), g.treatments, g.shared};
    pg.lattice = materialize_cuboids(pg.factored.units, lattice_subsets(ts, g), g.treatments);
    store.groups.push_back(std::move(pg));
  }
  return store;
}

SubclassifiedTable query_prepared(const PreparedStore& store, std::string_view treatment, const Predicate& predicate) {
  const auto& g = store.group_of(treatment);
  auto matched = cem_from_cube(g.lattice, store.treatments.covariates_of(treatment), treatment, g.factored.units);
  if (predicate.is_always()) return matched;
  return select_matched(matched, predicate);
}

void save_store(const PreparedStore& store, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw DataError("cannot write '" + (dir / "manifest.txt").string() + "'");
  manifest << "matchdb-store\t1\n";
  manifest << "objective\t" << exact(store.partition.objective) << '\n';
  for (const auto& t : store.treatments.treatments) {
    check_name(t);
    for (const auto& c : store.treatments.covariates_of(t)) check_name(c);
    manifest << "treatment\t" << t << '\t' << join_list(store.treatments.covariates_of(t)) << '\n';
  }
  for (std::size_t i = 0; i < store.groups.size(); ++i) {
    const auto& pg = store.groups[i];
    const Table& units = pg.factored.units;
    if (units.has(kSuperColumn))
      throw ArgumentError("column name '" + std::string(kSuperColumn) + "' is reserved in a stored database");
    manifest << "group\t" << i << '\t' << join_list(pg.group.treatments) << '\t' << join_list(pg.group.shared) << '\t'
             << join_list(pg.group.all) << '\t' << exact(pg.group.score) << '\n';
    manifest << "table\t" << i << '\t' << units.name() << '\t' << units.id_name() << '\t'
             << join_list(units.treatments()) << '\t' << units.outcome().value_or("") << '\n';
    for (std::size_t c = 0; c < units.column_count(); ++c) {
      check_name(units.column(c).name);
      manifest << "column\t" << i << '\t' << units.column(c).name << '\t' << to_string(units.column(c).kind) << '\n';
    }
    manifest << "lattice\t" << i << '\t' << pg.lattice.base_group_bys << '\t' << pg.lattice.cuboid_group_bys << '\n';

    auto gdir = dir / ("group_" + std::to_string(i));
    std::filesystem::create_directories(gdir);
    std::vector<double> super(pg.factored.supersubclass.begin(), pg.factored.supersubclass.end());
    write_csv(units.with_column(Column::numeric(std::string(kSuperColumn), std::move(super))), gdir / "P.csv");

    for (const auto& cub : pg.lattice.cuboids) {
      auto hash = subset_hash(cub.covariates);
      manifest << "cuboid\t" << i << '\t' << hash << '\t' << cub.source << '\t' << join_list(cub.covariates) << '\n';
      std::ofstream out(gdir / ("cuboid_" + hash + ".csv"));
      if (!out) throw DataError("cannot write cuboid file in '" + gdir.string() + "'");
      for (const auto& c : cub.covariates) out << c << ',';
      out << "count,max_id";
      for (const auto& t : pg.lattice.treatments) out << ",min_" << t << ",max_" << t;
      out << '\n';
      for (std::size_t cell = 0; cell < cub.cells; ++cell) {
        for (std::size_t d = 0; d < cub.covariates.size(); ++d) {
          const auto& col = units.column(cub.covariates[d]);
          double key = cub.keys[d][cell];
          if (col.kind == ColumnKind::Categorical)
            out << col.dictionary->label(static_cast<std::int32_t>(key));
          else
            out << format_double(key);
          out << ',';
        }
        out << cub.count[cell] << ',' << cub.max_id[cell];
        for (std::size_t t = 0; t < pg.lattice.treatments.size(); ++t)
          out << ',' << format_double(cub.min_t[t][cell]) << ',' << format_double(cub.max_t[t][cell]);
        out << '\n';
      }
    }
  }
}

namespace {

struct GroupManifest {
  TreatmentGroup group;
  std::string name, id_name, outcome;
  std::vector<std::string> roles;
  std::vector<std::pair<std::string, ColumnKind>> columns;
  std::size_t base_group_bys = 0, cuboid_group_bys = 0;
  struct CuboidEntry {
    std::string hash;
    int source = -1;
    std::vector<std::string> covariates;
  };
  std::vector<CuboidEntry> cuboids;
};

Cuboid read_cuboid(const std::filesystem::path& path, const GroupManifest::CuboidEntry& entry, const Table& units,
                   std::size_t treatments) {
  std::ifstream in(path);
  if (!in) throw DataError("missing cuboid file '" + path.string() + "'");
  Cuboid c;
  c.covariates = entry.covariates;
  c.source = entry.source;
  const std::size_t dims = c.covariates.size();
  const std::size_t width = dims + 2 + 2 * treatments;
  c.keys.assign(dims, {});
  c.min_t.assign(treatments, {});
  c.max_t.assign(treatments, {});
  std::string line;
  std::getline(in, line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::string where = path.string() + ":" + std::to_string(lineno);
    auto cells = split(line, ',');
    if (cells.size() != width) throw DataError(where + ": expected " + std::to_string(width) + " fields");
    for (std::size_t d = 0; d < dims; ++d) {
      const auto& col = units.column(c.covariates[d]);
      if (col.kind == ColumnKind::Categorical) {
        auto code = col.dictionary->find(cells[d]);
        if (!code) throw DataError(where + ": label '" + cells[d] + "' does not occur in the stored units");
        c.keys[d].push_back(*code);
      } else {
        c.keys[d].push_back(parse_number(cells[d], where));
      }
    }
    c.count.push_back(parse_int(cells[dims], where));
    c.max_id.push_back(parse_int(cells[dims + 1], where));
    for (std::size_t t = 0; t < treatments; ++t) {
      c.min_t[t].push_back(parse_number(cells[dims + 2 + 2 * t], where));
      c.max_t[t].push_back(parse_number(cells[dims + 3 + 2 * t], where));
    }
  }
  c.cells = c.count.size();
  return c;
}

}  // namespace

PreparedStore load_store(const std::filesystem::path& dir) {
  auto manifest_path = dir / "manifest.txt";
  std::ifstream in(manifest_path);
  if (!in) throw DataError("no prepared database at '" + dir.string() + "' (missing manifest.txt)");
  PreparedStore store;
  std::map<std::size_t, GroupManifest> groups;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::string where = manifest_path.string() + ":" + std::to_string(lineno);
    auto f = split(line, '\t');
    const auto& tag = f[0];
    auto need = [&](std::size_t k) {
      if (f.size() != k) throw DataError(where + ": malformed '" + tag + "' entry");
    };
    if (tag == "matchdb-store") {
      need(2);
      if (f[1] != "1") throw DataError(where + ": unsupported store version " + f[1]);
      header = true;
    } else if (!header) {
      throw DataError(where + ": not a prepared database manifest");
    } else if (tag == "objective") {
      need(2);
      store.partition.objective = parse_number(f[1], where);
    } else if (tag == "treatment") {
      need(3);
      store.treatments.treatments.push_back(f[1]);
      store.treatments.covariates[f[1]] = split_list(f[2]);
    } else if (tag == "group") {
      need(6);
      auto& g = groups[static_cast<std::size_t>(parse_int(f[1], where))];
      g.group.treatments = split_list(f[2]);
      g.group.shared = split_list(f[3]);
      g.group.all = split_list(f[4]);
      g.group.score = parse_number(f[5], where);
    } else if (tag == "table") {
      need(6);
      auto& g = groups[static_cast<std::size_t>(parse_int(f[1], where))];
      g.name = f[2];
      g.id_name = f[3];
      g.roles = split_list(f[4]);
      g.outcome = f[5];
    } else if (tag == "column") {
      need(4);
      groups[static_cast<std::size_t>(parse_int(f[1], where))].columns.emplace_back(f[2], parse_column_kind(f[3]));
    } else if (tag == "lattice") {
      need(4);
      auto& g = groups[static_cast<std::size_t>(parse_int(f[1], where))];
      g.base_group_bys = static_cast<std::size_t>(parse_int(f[2], where));
      g.cuboid_group_bys = static_cast<std::size_t>(parse_int(f[3], where));
    } else if (tag == "cuboid") {
      need(5);
      groups[static_cast<std::size_t>(parse_int(f[1], where))].cuboids.push_back(
          {f[2], static_cast<int>(parse_int(f[3], where)), split_list(f[4])});
    } else {
      throw DataError(where + ": unknown manifest entry '" + tag + "'");
    }
  }
  if (!header) throw DataError("'" + manifest_path.string() + "' is empty");

  std::size_t expected = 0;
  for (auto& [index, gm] : groups) {
    if (index != expected++) throw DataError("manifest groups are not numbered 0..n-1");
    auto gdir = dir / ("group_" + std::to_string(index));
    Schema schema;
    schema.id_column = gm.id_name;
    for (const auto& [name, kind] : gm.columns) schema.kinds[name] = kind;
    schema.kinds[std::string(kSuperColumn)] = ColumnKind::Numeric;
    Table loaded = load_csv(gdir / "P.csv", schema, gm.name);
    auto super_values = loaded.values(kSuperColumn);
    std::vector<std::int64_t> super(super_values.begin(), super_values.end());
    std::optional<std::string> outcome;
    if (!gm.outcome.empty()) outcome = gm.outcome;
    Table units = loaded.without_column(kSuperColumn).with_roles(gm.roles, outcome);

    PreparedGroup pg;
    pg.group = gm.group;
    pg.factored = FactoredTable{units, std::move(super), gm.group.treatments, gm.group.shared};
    pg.lattice.treatments = gm.group.treatments;
    pg.lattice.base_rows = units.rows();
    pg.lattice.base_group_bys = gm.base_group_bys;
    pg.lattice.cuboid_group_bys = gm.cuboid_group_bys;
    for (const auto& entry : gm.cuboids)
      pg.lattice.cuboids.push_back(
          read_cuboid(gdir / ("cuboid_" + entry.hash + ".csv"), entry, units, gm.group.treatments.size()));
    pg.lattice.attach(units);
    store.partition.groups.push_back(pg.group);
    store.groups.push_back(std::move(pg));
  }
  return store;
}

}  // namespace matchdb
