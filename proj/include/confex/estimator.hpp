#pragma once

#include "confex/data.hpp"
#include "confex/error.hpp"
#include "confex/glm.hpp"
#include "confex/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace confex {

// Propensity scores are clipped to [kPropensityClip, 1 - kPropensityClip].
inline constexpr double kPropensityClip = 1e-6;

// One orbit's doubly robust effect estimate with its influence values.
struct OrbitEstimate {
  std::vector<std::string> subset;
  double estimate = 0.0;
  Eigen::VectorXd influence;  // may be released after use (see EliminationOptions)
  double variance = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  bool perturbed = false;
};

// A nuisance-model failure for one adjustment set.
class ModelFitError : public Error {
 public:
  ModelFitError(std::string model, std::vector<std::string> subset, ErrorCode cause, const std::string& detail);

  const std::string& model() const noexcept { return model_; }
  const std::vector<std::string>& subset() const noexcept { return subset_; }
  ErrorCode cause() const noexcept { return cause_; }

 private:
  std::string model_;
  std::vector<std::string> subset_;
  ErrorCode cause_;
};

// z_{1 - alpha/2}
double normal_critical_value(double alpha);

// W_i = A_i / p_i + (1 - A_i) / (1 - p_i) after clipping p_i.
Eigen::VectorXd exposure_weights(const Eigen::VectorXd& propensity, const Eigen::VectorXd& exposure);

// Exposure model (logit of A on 1 + L_S) and IPW-weighted outcome model
// (on 1 + A + L_S) for one covariate subset.
struct NuisanceFit {
  std::vector<Index> subset;
  Eigen::VectorXd weights;   // clipped inverse probability of exposure weights
  ModelFit exposure;
  ModelFit outcome;          // coefficients: intercept, exposure, subset covariates
  Eigen::MatrixXd outcome_factor;  // F F' = outcome.covariance; empty if not factorizable
  // Set when a binary outcome never varies: the likelihood is maximized on the
  // boundary, so the fitted mean is this value everywhere.
  std::optional<double> constant_outcome;
};

Family outcome_family(OutcomeKind kind) noexcept;

// Throws ModelFitError.
NuisanceFit fit_nuisance(const Dataset& data, std::span<const Index> subset);

// Effect, influence values and Wald CI with the given outcome coefficients and
// the fit's MLE exposure weights.
OrbitEstimate evaluate_effect(const Dataset& data, const NuisanceFit& fit, const Eigen::VectorXd& outcome_coefficients,
                              double alpha, bool perturbed);

// Perturbed estimate: one draw of the outcome coefficients from their
// asymptotic normal distribution. With zero_covariance the draw is the MLE.
OrbitEstimate perturbed_effect(const Dataset& data, const NuisanceFit& fit, Rng& rng, double alpha,
                               bool zero_covariance = false);

OrbitEstimate dr_effect(const Dataset& data, std::span<const std::string> subset,
                        const std::optional<Eigen::VectorXd>& outcome_coefficients = std::nullopt,
                        double alpha = 0.05);

// (n (n - 1))^-1 sum (phi_j - phi_k)^2. Throws LengthMismatch.
double variance_of_difference(const Eigen::VectorXd& influence_j, const Eigen::VectorXd& influence_k);

// max(0, (estimate_j - estimate_k)^2 - var_diff)
double debiased_gap(double estimate_j, double estimate_k, double var_diff) noexcept;

// Thread-safe memo of nuisance fits keyed by covariate subset, bound to one
// dataset. Fits are pure functions of the subset, so sharing is
// order-independent. Failures are memoized too. Once `capacity` entries are
// held, further fits are computed but not stored.
class FitCache {
 public:
  explicit FitCache(const Dataset& data, std::size_t capacity = 200000);

  std::shared_ptr<const NuisanceFit> get(std::span<const Index> subset);

  const Dataset& data() const noexcept { return *data_; }
  std::size_t size() const;
  std::size_t fits_performed() const;

 private:
  struct Entry {
    std::shared_ptr<const NuisanceFit> fit;
    std::shared_ptr<const ModelFitError> failure;
  };
  const Dataset* data_;
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::map<std::vector<Index>, Entry> entries_;
  std::size_t fits_performed_ = 0;
};

}  // namespace confex
