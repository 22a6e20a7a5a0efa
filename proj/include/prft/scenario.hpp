// Scenario files: JSON description -> library calls -> tables and summaries.
#pragma once

#include "prft/io.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace prft::scenario {

using json = nlohmann::json;

struct Invariant {
  std::string name;
  int variant = 0;
  std::string state;
  double value = 0.0;
  double tolerance = 0.0;
  bool enforced = true;
  bool passed = true;
};

struct RunOptions {
  int threads = 0;
  std::optional<std::uint64_t> seed;
};

struct RunResult {
  std::string name;
  json summary;
  json manifest;
  Table cumulants, quasiprob, pn, purity, spin;
  std::vector<Invariant> invariants;

  std::vector<std::string> failures() const;  // enforced invariants that did not pass
  bool ok() const { return failures().empty(); }
};

// A bundled scenario name or a path to a JSON file.
json load(const std::string& path_or_name);

// Schema and physics checks without running. Empty means valid.
std::vector<std::string> validate(const json& scenario);

// Throws ValidationError for invalid input; numerical failures are recorded as
// failed invariants (and as Error subclasses when a step cannot continue).
RunResult run(const json& scenario, const RunOptions& options = {});

void write_outputs(const RunResult& result, const std::string& directory);

std::string scenario_directory();
std::vector<std::string> bundled_names();

}  // namespace prft::scenario
