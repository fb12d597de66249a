#pragma once

#include <ostream>

#include "fradkov/io.hpp"

namespace fradkov {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNonpositiveDenominator = 3,
  kExitNotConverged = 4,
};

/// Executes one subcommand and writes its files under config.out_dir. Failures are reported
/// as a one-line JSON record on `log` (and error.json when the output directory exists).
int run(const RunConfig& config, std::ostream& log);

/// Largest relative difference between the summary diagnostics of two manifests.
double max_relative_difference(const RunManifest& a, const RunManifest& b);

}  // namespace fradkov
