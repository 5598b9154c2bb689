#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"

namespace bpl::cli {

struct Outcome {
  json result;  // scalars; result.json
  std::vector<std::pair<std::string, std::string>> files;  // relative path, contents
  int exit_code = 0;       // 2 when a checked property failed
  std::string violation;   // first failed property
};

const std::vector<std::string>& mode_names();

// Dispatches on config["mode"]. Module errors propagate as bpl::Error.
Outcome run_mode(const json& config, std::uint64_t seed, int threads);

// Rebuilds a flow trace from a flow output directory (manifest config, trace.csv, snapshots)
// and evaluates the record checks and weak residuals.
json diagnose_directory(const std::string& dir, std::string* violation);

}  // namespace bpl::cli
