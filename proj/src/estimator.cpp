#include "confex/estimator.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>

namespace confex {

namespace {

std::string join(const std::vector<std::string>& names) {
  if (names.empty()) return "{}";
  std::string out = "{";
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (k) out += ", ";
    out += names[k];
  }
  return out + "}";
}

std::vector<std::string> names_of(const Dataset& data, std::span<const Index> subset) {
  std::vector<std::string> names;
  names.reserve(subset.size());
  for (Index k : subset) names.push_back(data.covariate_names()[static_cast<std::size_t>(k)]);
  return names;
}

Eigen::MatrixXd gather_columns(const Dataset& data, std::span<const Index> subset) {
  Eigen::MatrixXd l(data.n(), static_cast<Index>(subset.size()));
  for (Index k = 0; k < static_cast<Index>(subset.size()); ++k) l.col(k) = data.covariates().col(subset[k]);
  return l;
}

}  // namespace

ModelFitError::ModelFitError(std::string model, std::vector<std::string> subset, ErrorCode cause,
                             const std::string& detail)
    : Error(ErrorCode::ModelFitFailed, model + " model on " + join(subset) + ": " + detail),
      model_(std::move(model)),
      subset_(std::move(subset)),
      cause_(cause) {}

double normal_critical_value(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  boost::math::normal_distribution<> standard;
  return boost::math::quantile(standard, 1.0 - alpha / 2.0);
}

Eigen::VectorXd exposure_weights(const Eigen::VectorXd& propensity, const Eigen::VectorXd& exposure) {
  if (propensity.size() != exposure.size())
    throw Error(ErrorCode::LengthMismatch, "propensity and exposure lengths differ");
  Eigen::VectorXd w(propensity.size());
  for (Index i = 0; i < w.size(); ++i) {
    double p = std::clamp(propensity(i), kPropensityClip, 1.0 - kPropensityClip);
    w(i) = exposure(i) / p + (1.0 - exposure(i)) / (1.0 - p);
  }
  return w;
}

Family outcome_family(OutcomeKind kind) noexcept {
  return kind == OutcomeKind::binary ? Family::bernoulli_logit : Family::gaussian_identity;
}

NuisanceFit fit_nuisance(const Dataset& data, std::span<const Index> subset) {
  const Index n = data.n();
  const Index s = static_cast<Index>(subset.size());
  NuisanceFit fit;
  fit.subset.assign(subset.begin(), subset.end());
  Eigen::MatrixXd l = gather_columns(data, subset);

  Eigen::MatrixXd exposure_design(n, s + 1);
  exposure_design.col(0).setOnes();
  exposure_design.rightCols(s) = l;
  try {
    fit.exposure = fit_glm(exposure_design, data.exposure(), Family::bernoulli_logit);
  } catch (const Error& e) {
    throw ModelFitError("exposure", names_of(data, subset), e.code(), e.what());
  }
  fit.weights = exposure_weights(predict_mean(fit.exposure, exposure_design), data.exposure());

  Eigen::MatrixXd outcome_design(n, s + 2);
  outcome_design.col(0).setOnes();
  outcome_design.col(1) = data.exposure();
  outcome_design.rightCols(s) = l;
  const auto& y = data.outcome();
  if (data.outcome_kind() == OutcomeKind::binary && (y.array() == y(0)).all()) {
    fit.constant_outcome = y(0);
    fit.outcome.family = Family::bernoulli_logit;
    fit.outcome.coefficients = Eigen::VectorXd::Zero(s + 2);
    fit.outcome.covariance = Eigen::MatrixXd::Zero(s + 2, s + 2);
    fit.outcome.converged = true;
    fit.outcome_factor = fit.outcome.covariance;
    return fit;
  }
  try {
    fit.outcome = fit_glm(outcome_design, y, outcome_family(data.outcome_kind()), fit.weights);
  } catch (const Error& e) {
    throw ModelFitError("outcome", names_of(data, subset), e.code(), e.what());
  }
  try {
    fit.outcome_factor = psd_factor(fit.outcome.covariance);
  } catch (const Error&) {
    fit.outcome_factor.resize(0, 0);
  }
  return fit;
}

OrbitEstimate evaluate_effect(const Dataset& data, const NuisanceFit& fit, const Eigen::VectorXd& coefficients,
                              double alpha, bool perturbed) {
  const Index n = data.n();
  const Index s = static_cast<Index>(fit.subset.size());
  if (coefficients.size() != s + 2)
    throw Error(ErrorCode::DimensionMismatch, "outcome coefficients must have length " + std::to_string(s + 2));
  const Family family = fit.outcome.family;
  Eigen::VectorXd base = Eigen::VectorXd::Constant(n, coefficients(0));
  for (Index k = 0; k < s; ++k) base.noalias() += coefficients(k + 2) * data.covariates().col(fit.subset[k]);

  const auto& a = data.exposure();
  const auto& y = data.outcome();
  Eigen::VectorXd term(n);
  for (Index i = 0; i < n; ++i) {
    double m0 = fit.constant_outcome ? *fit.constant_outcome : glm::inverse_link(family, base(i));
    double m1 = fit.constant_outcome ? *fit.constant_outcome : glm::inverse_link(family, base(i) + coefficients(1));
    double fitted = a(i) == 1.0 ? m1 : m0;
    term(i) = (2.0 * a(i) - 1.0) * fit.weights(i) * (y(i) - fitted) + m1 - m0;
  }

  OrbitEstimate out;
  out.subset = names_of(data, fit.subset);
  out.estimate = term.mean();
  out.influence = term.array() - out.estimate;
  out.variance = out.influence.squaredNorm() / (static_cast<double>(n) * static_cast<double>(n - 1));
  double half = normal_critical_value(alpha) * std::sqrt(out.variance);
  out.ci_lower = out.estimate - half;
  out.ci_upper = out.estimate + half;
  out.perturbed = perturbed;
  return out;
}

OrbitEstimate perturbed_effect(const Dataset& data, const NuisanceFit& fit, Rng& rng, double alpha,
                               bool zero_covariance) {
  if (zero_covariance) return evaluate_effect(data, fit, fit.outcome.coefficients, alpha, true);
  if (fit.outcome_factor.size() == 0 && fit.outcome.covariance.size() != 0)
    throw Error(ErrorCode::CovarianceNotPSD, "outcome covariance could not be factorized");
  Eigen::VectorXd draw = sample_coefficients(fit.outcome.coefficients, fit.outcome_factor, rng);
  return evaluate_effect(data, fit, draw, alpha, true);
}

OrbitEstimate dr_effect(const Dataset& data, std::span<const std::string> subset,
                        const std::optional<Eigen::VectorXd>& outcome_coefficients, double alpha) {
  std::vector<Index> idx = data.covariate_indices(subset);
  std::sort(idx.begin(), idx.end());
  if (std::adjacent_find(idx.begin(), idx.end()) != idx.end())
    throw Error(ErrorCode::InvalidArgument, "subset lists a covariate twice");
  NuisanceFit fit = fit_nuisance(data, idx);
  if (outcome_coefficients) return evaluate_effect(data, fit, *outcome_coefficients, alpha, true);
  return evaluate_effect(data, fit, fit.outcome.coefficients, alpha, false);
}

double variance_of_difference(const Eigen::VectorXd& influence_j, const Eigen::VectorXd& influence_k) {
  if (influence_j.size() != influence_k.size())
    throw Error(ErrorCode::LengthMismatch, "influence vectors have different lengths");
  const double n = static_cast<double>(influence_j.size());
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "need at least two observations");
  return (influence_j - influence_k).squaredNorm() / (n * (n - 1.0));
}

double debiased_gap(double estimate_j, double estimate_k, double var_diff) noexcept {
  double d = estimate_j - estimate_k;
  return std::max(0.0, d * d - var_diff);
}

FitCache::FitCache(const Dataset& data, std::size_t capacity) : data_(&data), capacity_(capacity) {}

std::shared_ptr<const NuisanceFit> FitCache::get(std::span<const Index> subset) {
  std::vector<Index> key(subset.begin(), subset.end());
  std::sort(key.begin(), key.end());
  {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      if (it->second.failure) throw *it->second.failure;
      return it->second.fit;
    }
  }
  Entry entry;
  try {
    entry.fit = std::make_shared<const NuisanceFit>(fit_nuisance(*data_, key));
  } catch (const ModelFitError& e) {
    entry.failure = std::make_shared<const ModelFitError>(e);
  }
  {
    std::lock_guard lock(mutex_);
    ++fits_performed_;
    if (entries_.size() < capacity_) entries_.emplace(key, entry);
  }
  if (entry.failure) throw *entry.failure;
  return entry.fit;
}

std::size_t FitCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::size_t FitCache::fits_performed() const {
  std::lock_guard lock(mutex_);
  return fits_performed_;
}

}  // namespace confex
