#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "matchdb/cube.hpp"
#include "matchdb/multi.hpp"
#include "matchdb/predicate.hpp"
#include "matchdb/subclass.hpp"

namespace matchdb {

// One treatment group of a prepared database: its factored units and a
// lattice over them holding a cuboid for every member's covariate set.
struct PreparedGroup {
  TreatmentGroup group;
  FactoredTable factored;
  CuboidLattice lattice;
};

struct PreparedStore {
  TreatmentSet treatments;
  FactoredPartition partition;
  std::vector<PreparedGroup> groups;

  // Group holding the treatment; the error lists the available ones.
  const PreparedGroup& group_of(std::string_view treatment) const;
  std::vector<std::string> treatment_names() const;
};

// Offline preparation: partition the treatments, materialize the shared
// covariate group-bys over the base table, factor each group, and build a
// per-group lattice sufficient for every member treatment's CEM.
PreparedStore prepare_database(const Table& table, const TreatmentSet& ts, std::size_t n);

// Full-population CEM for the treatment read from the store, then the
// predicate, then the per-subclass overlap filter again.
SubclassifiedTable query_prepared(const PreparedStore& store, std::string_view treatment,
                                  const Predicate& predicate = Predicate::always());

// Directory layout: manifest.txt, group_<i>/P.csv, group_<i>/cuboid_<hash>.csv.
void save_store(const PreparedStore& store, const std::filesystem::path& dir);
PreparedStore load_store(const std::filesystem::path& dir);

// FNV-1a hash (hex) of the sorted covariate names.
std::string subset_hash(std::span<const std::string> covariates);

}  // namespace matchdb
