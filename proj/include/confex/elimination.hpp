#pragma once

#include "confex/data.hpp"
#include "confex/estimator.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace confex {

enum class TrajectoryMode { mle, perturbed };

// orbits[j] adjusts for j covariates: orbits[0] is the unadjusted contrast and
// orbits[J] the full measured set. elimination_order lists covariates in
// removal order (weakest impact first).
struct Trajectory {
  std::vector<OrbitEstimate> orbits;
  std::vector<std::string> elimination_order;
  bool perturbed = false;
  std::uint64_t seed = 0;
  // Leave-one-out effect evaluations performed (J(J+1)/2 for a full run).
  std::size_t evaluations = 0;
};

struct EliminationEvent {
  int orbit = 0;  // number of covariates in the reference set
  std::string candidate;
  std::string message;
};

struct EliminationOptions {
  double alpha = 0.05;
  double tie_tolerance = 1e-12;
  // Shared fit memo; when null a private one is used.
  FitCache* cache = nullptr;
  // Test hook: perturbed draws collapse to the MLE.
  bool zero_covariance = false;
  // Stop after this many eliminations (orbits below stay empty).
  std::optional<int> max_eliminations;
  // Drop influence vectors from stored orbits once the trajectory is built.
  bool retain_influence = true;
  // Receives candidates whose nuisance fit failed (their gap is set to +inf).
  std::function<void(const EliminationEvent&)> on_failure;
};

// Greedy backward elimination by the debiased squared change in the effect.
// Deterministic in (data, mode, seed, options). Throws ModelFitError if the
// full set, or every candidate of an orbit, cannot be fitted.
Trajectory build_trajectory(const Dataset& data, TrajectoryMode mode, std::uint64_t seed,
                            const EliminationOptions& options = {});

// Independent sub-stream seeds used by build_trajectory.
namespace streams {
inline constexpr std::uint64_t kTop = 0xA11;
inline constexpr std::uint64_t kTie = 0x71E;
inline constexpr std::uint64_t kCandidate = 0xCA4D;
}  // namespace streams

// Default logger for EliminationOptions::on_failure: one line on stderr.
void log_elimination_event(const EliminationEvent& event);

}  // namespace confex
