#include "confex/elimination.hpp"

#include "confex/rng.hpp"

#include <cmath>
#include <iostream>
#include <limits>

namespace confex {

namespace {

OrbitEstimate estimate_subset(const Dataset& data, FitCache& cache, std::span<const Index> subset, TrajectoryMode mode,
                              std::uint64_t stream_seed, const EliminationOptions& options) {
  auto fit = cache.get(subset);
  if (mode == TrajectoryMode::mle) return evaluate_effect(data, *fit, fit->outcome.coefficients, options.alpha, false);
  Rng rng = make_rng(stream_seed);
  try {
    return perturbed_effect(data, *fit, rng, options.alpha, options.zero_covariance);
  } catch (const ModelFitError&) {
    throw;
  } catch (const Error& e) {
    std::vector<std::string> names;
    for (Index k : subset) names.push_back(data.covariate_names()[static_cast<std::size_t>(k)]);
    throw ModelFitError("outcome", std::move(names), e.code(), e.what());
  }
}

}  // namespace

void log_elimination_event(const EliminationEvent& event) {
  std::cerr << "confex: orbit " << event.orbit << ", candidate '" << event.candidate
            << "' skipped (gap set to +inf): " << event.message << '\n';
}

Trajectory build_trajectory(const Dataset& data, TrajectoryMode mode, std::uint64_t seed,
                            const EliminationOptions& options) {
  const int J = static_cast<int>(data.num_covariates());
  std::optional<FitCache> own_cache;
  FitCache* cache = options.cache;
  if (!cache) cache = &own_cache.emplace(data);
  if (&cache->data() != &data) throw Error(ErrorCode::InvalidArgument, "fit cache is bound to a different dataset");

  Trajectory traj;
  traj.perturbed = mode == TrajectoryMode::perturbed;
  traj.seed = seed;
  traj.orbits.resize(static_cast<std::size_t>(J) + 1);

  std::vector<Index> current(static_cast<std::size_t>(J));
  for (int k = 0; k < J; ++k) current[static_cast<std::size_t>(k)] = k;

  OrbitEstimate reference = estimate_subset(data, *cache, current, mode, derive_seed(seed, streams::kTop), options);
  Rng tie_rng = make_rng(derive_seed(seed, streams::kTie));
  const int steps = std::min(J, options.max_eliminations.value_or(J));

  for (int j = J; j > J - steps; --j) {
    std::vector<OrbitEstimate> candidates(static_cast<std::size_t>(j));
    std::vector<double> gaps(static_cast<std::size_t>(j), std::numeric_limits<double>::infinity());
    std::vector<Index> reduced(static_cast<std::size_t>(j) - 1);
    for (int c = 0; c < j; ++c) {
      for (int m = 0, w = 0; m < j; ++m)
        if (m != c) reduced[static_cast<std::size_t>(w++)] = current[static_cast<std::size_t>(m)];
      const Index dropped = current[static_cast<std::size_t>(c)];
      ++traj.evaluations;
      try {
        std::uint64_t stream = derive_seed(seed, streams::kCandidate, static_cast<std::uint64_t>(j) * 1000003ULL +
                                                                         static_cast<std::uint64_t>(dropped));
        auto& cand = candidates[static_cast<std::size_t>(c)];
        cand = estimate_subset(data, *cache, reduced, mode, stream, options);
        gaps[static_cast<std::size_t>(c)] =
            debiased_gap(cand.estimate, reference.estimate, variance_of_difference(cand.influence, reference.influence));
      } catch (const ModelFitError& e) {
        EliminationEvent event{j, data.covariate_names()[static_cast<std::size_t>(dropped)], e.what()};
        if (options.on_failure) options.on_failure(event);
        else log_elimination_event(event);
      }
    }

    double best = std::numeric_limits<double>::infinity();
    for (double g : gaps) best = std::min(best, g);
    if (!std::isfinite(best))
      throw ModelFitError("exposure/outcome", {}, ErrorCode::ModelFitFailed,
                          "no candidate could be fitted at orbit " + std::to_string(j));
    std::vector<int> tied;
    for (int c = 0; c < j; ++c)
      if (gaps[static_cast<std::size_t>(c)] - best <= options.tie_tolerance) tied.push_back(c);
    int chosen = tied.front();
    if (tied.size() > 1) {
      std::uniform_int_distribution<std::size_t> pick(0, tied.size() - 1);
      chosen = tied[pick(tie_rng)];
    }

    const Index removed = current[static_cast<std::size_t>(chosen)];
    traj.elimination_order.push_back(data.covariate_names()[static_cast<std::size_t>(removed)]);
    current.erase(current.begin() + chosen);

    traj.orbits[static_cast<std::size_t>(j)] = std::move(reference);
    reference = std::move(candidates[static_cast<std::size_t>(chosen)]);
  }
  traj.orbits[static_cast<std::size_t>(J - steps)] = std::move(reference);

  if (!options.retain_influence)
    for (auto& orbit : traj.orbits) orbit.influence.resize(0);
  return traj;
}

}  // namespace confex
