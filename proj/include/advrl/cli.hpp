#pragma once

#include <json.hpp>

// Command-line front end: `advrl <command> [--config PATH] [--seed N]
// [--out DIR] [--workers N] ...`.
namespace advrl::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kExperimentFailure = 3,
  kCorruptInput = 4,
};

/// Every configuration field with its default value.
nlohmann::json default_config();

/// Runs one command and returns its exit code. Diagnostics go to stderr.
int run(int argc, const char* const* argv);

}  // namespace advrl::cli
