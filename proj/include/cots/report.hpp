#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cots/driver.hpp"
#include "cots/parser.hpp"

namespace cots::report {

struct CoverageReport {
  int nodes_covered = 0;
  int nodes_total = 0;
  int branches_covered = 0;  // arms of choices with >= 2 branches
  int branches_total = 0;

  double node_ratio() const { return nodes_total ? double(nodes_covered) / nodes_total : 0.0; }
  double branch_ratio() const {
    return branches_total ? double(branches_covered) / branches_total : 0.0;
  }
  nlohmann::json to_json() const;
};

class ForeignRecord : public std::runtime_error {
 public:
  explicit ForeignRecord(const std::string& what) : std::runtime_error(what) {}
};

// A node is covered iff its prefix ran in some record; an arm is covered iff
// its head prefix is. Throws ForeignRecord if a record mentions node ids the
// model does not have.
CoverageReport coverage(const parser::ParsedModel& model,
                        const std::vector<driver::RunRecord>& records);

// JSON Lines, one object per run:
//   {"run":int,"seed":int,"verdict":{"kind":...},"events":[...],"ms":int}
// Event payloads longer than 2 KiB are truncated in the line; the full record
// is then written to <sidecar_dir>/run-<i>.json.
void write_log(const std::vector<driver::RunRecord>& records, std::ostream& sink,
               const std::optional<std::filesystem::path>& sidecar_dir = {});

nlohmann::json log_entry(const driver::RunRecord& record,
                         const std::optional<std::filesystem::path>& sidecar_dir = {});

// A POSIX shell script replaying the record's requests with curl, printing
// one HTTP status per line. BASE_URL overrides the recorded base.
std::string emit_curl(const driver::RunRecord& record);

// temp-file-plus-rename, so interrupted campaigns never leave partial files
void write_file_atomic(const std::filesystem::path& path, const std::string& content,
                       bool executable = false);

}  // namespace cots::report
