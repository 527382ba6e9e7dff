#pragma once

#include <iosfwd>
#include <string>

#include "bellqft/grid.hpp"
#include "config.hpp"

namespace bellqft::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 1, kValidation = 2, kVerificationFailed = 3 };

/// "x1,x2,..." in length units; an empty string or "vacuum" is the empty configuration.
Configuration parse_configuration(const std::string& text);

/// Psi snapshots at the sample times plus norms.csv (norm, energy, sector masses).
int cmd_evolve(const RunConfig& cfg, std::ostream& log);

/// Ensemble run: trajectories.jsonl, histograms.csv and an equivariance summary.
/// Exit 0 if fewer than 1% of trajectories failed.
int cmd_simulate(const RunConfig& cfg, unsigned parallelism, std::ostream& log);

/// Exact identities first, then the equivariance test.
int cmd_verify(const RunConfig& cfg, unsigned parallelism, std::ostream& log);

/// Jump-rate row at (t, q) as JSON on `out`.
int cmd_rates(const RunConfig& cfg, double t, const Configuration& q, std::ostream& out);

/// Single Dirac particle: dirac_path.csv with (t, x, v); fails if |v| > c anywhere.
int cmd_dirac_demo(const RunConfig& cfg, std::ostream& log);

/// Full command-line entry point.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bellqft::cli
