#pragma once

#include "confex/data.hpp"
#include "confex/simulation.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace confex::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 1, kDataError = 2, kNumericFailure = 3 };

enum class KnotPolicy { cv, max, fixed };

struct AnalyzeConfig {
  std::filesystem::path data;
  std::string exposure;
  std::string outcome;
  OutcomeKind outcome_kind = OutcomeKind::binary;
  std::vector<std::string> covariates;  // empty: every other column
  std::size_t B = 500;
  double alpha = 0.05;
  int q_max = 0;  // 0: ceil(J / 2)
  double trim = 0.05;
  KnotPolicy knots = KnotPolicy::cv;
  int fixed_knots = 0;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  unsigned threads = 1;
};

struct SimulateConfig {
  Scenario scenario;
  std::filesystem::path out;
  unsigned threads = 1;
};

// Writes orbits.csv, extrapolation.csv, trajectory.svg and run.json into
// config.out. On failure, removes whatever it had written and returns a
// nonzero exit code after printing a diagnostic to `err`.
int run_analyze(const AnalyzeConfig& config, std::ostream& err);

// Writes report.csv and run.json into config.out.
int run_simulate(const SimulateConfig& config, std::ostream& err);

// Full command line: `analyze ...` or `simulate ...`, with --config FILE
// (TOML/INI) whose values are overridden by explicit flags.
int run(int argc, const char* const* argv);

}  // namespace confex::cli
