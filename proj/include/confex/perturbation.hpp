#pragma once

#include "confex/elimination.hpp"

#include <cstdint>
#include <vector>

namespace confex {

// Observed (MLE) trajectory plus B perturbed replicates.
struct TrajectoryEnsemble {
  Trajectory observed;
  std::vector<Trajectory> perturbed;
  std::size_t B = 0;
  std::uint64_t master_seed = 0;
};

struct EnsembleOptions {
  double alpha = 0.05;
  unsigned threads = 1;  // 0 = all hardware threads
  bool zero_covariance = false;
  bool retain_perturbed_influence = true;
  std::size_t cache_capacity = 200000;
};

// Seed of replicate b (b = 0 is the observed trajectory, 1..B perturbed).
std::uint64_t replicate_seed(std::uint64_t master_seed, std::size_t b) noexcept;

// Deterministic in (data, B, master_seed, options) regardless of thread count.
TrajectoryEnsemble build_ensemble(const Dataset& data, std::size_t B, std::uint64_t master_seed,
                                  const EnsembleOptions& options = {});

}  // namespace confex
