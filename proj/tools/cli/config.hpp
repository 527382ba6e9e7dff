#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "bellqft/analysis.hpp"
#include "bellqft/model.hpp"
#include "bellqft/process.hpp"
#include "bellqft/propagator.hpp"

namespace bellqft::cli {

/// The config file could not be read at all (usage problem, exit 1).
class ConfigFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DiracInitial {
  SpinorStateSpec spinor;
  double x0 = 0.0;
};

struct ProcessSection {
  ProcessMode mode = ProcessMode::Lattice;
  double dt = 0.01;
  std::size_t trajectories = 1000;
  std::uint64_t root_seed = 1;
  bool jitter = false;
};

struct AnalysisSection {
  Thresholds thresholds;
  bool negative_control = false;  // compare a frozen |Psi_0|^2 ensemble instead of the dynamics
  int identity_states = 20;       // seeded random states for the generator identity
};

struct OutputSection {
  std::filesystem::path directory = "out";
  std::set<std::string> formats{"json", "csv", "jsonl"};

  bool wants(const std::string& format) const { return formats.count(format) != 0; }
};

struct RunConfig {
  ModelSpec model{GridSpec(1.0, 3)};
  InitialStateSpec initial;
  std::optional<DiracInitial> dirac_initial;
  PropagatorPlan propagator;
  ProcessSection process;
  AnalysisSection analysis;
  OutputSection output;
  nlohmann::json raw;  // effective document, after flag overrides
  std::string hash;    // FNV-1a of raw.dump()

  ProcessSettings process_settings() const;
};

/// Strict parse: unknown keys and wrong types raise ValidationError naming the key.
RunConfig parse_config(const nlohmann::json& doc);

/// Reads and parses a file. A missing or unreadable file raises ConfigFileError;
/// malformed JSON raises ValidationError.
nlohmann::json read_config_file(const std::filesystem::path& path);

std::string config_hash(const nlohmann::json& doc);

}  // namespace bellqft::cli
