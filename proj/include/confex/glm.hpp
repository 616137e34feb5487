#pragma once

#include "confex/rng.hpp"

#include <Eigen/Dense>

namespace confex {

enum class Family { bernoulli_logit, bernoulli_probit, gaussian_identity };

const char* to_string(Family family) noexcept;

// Fitted generalized linear model. Coefficients are ordered as the design
// columns (intercept first by convention). `covariance` is the inverse of the
// (prior-weighted) observed Fisher information at the optimum, scaled by the
// estimated dispersion for the Gaussian family.
struct ModelFit {
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;
  Family family = Family::bernoulli_logit;
  bool converged = false;
  int iterations = 0;
  double deviance = 0.0;
  double dispersion = 1.0;
};

struct GlmOptions {
  double deviance_tolerance = 1e-10;  // relative deviance change
  double score_tolerance = 1e-6;      // max |score component|
  int max_iterations = 100;
  double separation_threshold = 30.0;  // Bernoulli families only
};

namespace glm {

double inverse_link(Family family, double eta) noexcept;
double link(Family family, double mu) noexcept;
// d mu / d eta
double mean_derivative(Family family, double eta) noexcept;

}  // namespace glm

// IRLS maximum likelihood. Throws SeparationDetected, NonConvergence,
// RankDeficient, DimensionMismatch or InvalidArgument.
ModelFit fit_glm(const Eigen::MatrixXd& design, const Eigen::VectorXd& response, Family family,
                 const GlmOptions& options = {});
ModelFit fit_glm(const Eigen::MatrixXd& design, const Eigen::VectorXd& response, Family family,
                 const Eigen::VectorXd& prior_weights, const GlmOptions& options = {});

// Weighted score X' W (y - mu) mu'/V at the given coefficients; used by the
// convergence check and exposed for tests.
Eigen::VectorXd glm_score(const Eigen::MatrixXd& design, const Eigen::VectorXd& response, Family family,
                          const Eigen::VectorXd& prior_weights, const Eigen::VectorXd& coefficients);

Eigen::VectorXd predict_mean(const ModelFit& fit, const Eigen::MatrixXd& design_rows);

// Factor of a symmetric positive semidefinite matrix: returns F with F F' = S
// (+ ridge). Tries ridge 0, then 1e-12 escalating x10 to 1e-8. Throws
// CovarianceNotPSD when every attempt fails.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& covariance);

// One multivariate normal draw N(coefficients, covariance). Consumes exactly p
// standard normals from rng.
Eigen::VectorXd sample_coefficients(const ModelFit& fit, Rng& rng);
Eigen::VectorXd sample_coefficients(const Eigen::VectorXd& mean, const Eigen::MatrixXd& factor, Rng& rng);

}  // namespace confex
