#include "confex/perturbation.hpp"

#include "confex/parallel.hpp"
#include "confex/rng.hpp"

namespace confex {

std::uint64_t replicate_seed(std::uint64_t master_seed, std::size_t b) noexcept {
  return derive_seed(master_seed, static_cast<std::uint64_t>(b));
}

TrajectoryEnsemble build_ensemble(const Dataset& data, std::size_t B, std::uint64_t master_seed,
                                  const EnsembleOptions& options) {
  if (B < 1) throw Error(ErrorCode::InvalidArgument, "ensemble needs B >= 1 perturbed trajectories");
  FitCache cache(data, options.cache_capacity);

  EliminationOptions elim;
  elim.alpha = options.alpha;
  elim.cache = &cache;
  elim.zero_covariance = options.zero_covariance;

  TrajectoryEnsemble ensemble;
  ensemble.B = B;
  ensemble.master_seed = master_seed;
  ensemble.observed = build_trajectory(data, TrajectoryMode::mle, replicate_seed(master_seed, 0), elim);

  elim.retain_influence = options.retain_perturbed_influence;
  ensemble.perturbed.resize(B);
  parallel_for(B, options.threads, [&](std::size_t b) {
    try {
      ensemble.perturbed[b] = build_trajectory(data, TrajectoryMode::perturbed, replicate_seed(master_seed, b + 1), elim);
    } catch (const ModelFitError& e) {
      throw ModelFitError(e.model(), e.subset(), e.cause(),
                          std::string("perturbed replicate ") + std::to_string(b + 1) + ": " + e.what());
    }
  });
  return ensemble;
}

}  // namespace confex
