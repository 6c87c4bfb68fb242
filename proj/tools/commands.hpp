#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"
#include "matchdb/table.hpp"

namespace matchdb::cli {

// Row counts and settings per pipeline stage, written as run.log.
class RunLog {
 public:
  void add(std::string stage, std::string detail);
  void write(const std::filesystem::path& path) const;
  const std::vector<std::string>& lines() const { return lines_; }

 private:
  std::vector<std::string> lines_;
};

// Loaded inputs joined in config order, with coarsened columns added.
Table load_base(const Config& cfg, RunLog& log);
// Adds or checks the treatment column. Derived treatments drop rows
// matching neither predicate unless `allow_discard` is false.
Table apply_treatment(const Table& table, const TreatmentSpec& spec, bool allow_discard, RunLog& log);

void cmd_match(const Config& cfg, const std::filesystem::path& out);
void cmd_balance(const Config& cfg, const std::filesystem::path& matched, const std::filesystem::path& out);
void cmd_ate(const Config& cfg, const std::filesystem::path& matched, const std::filesystem::path& out);
void cmd_prepare(const Config& cfg, const std::filesystem::path& out);
void cmd_query(const std::filesystem::path& store, const std::string& treatment, const std::string& where,
               const std::filesystem::path& out);

}  // namespace matchdb::cli
