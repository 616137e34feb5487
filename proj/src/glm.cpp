#include "confex/glm.hpp"

#include "confex/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace confex {

const char* to_string(Family family) noexcept {
  switch (family) {
    case Family::bernoulli_logit: return "bernoulli_logit";
    case Family::bernoulli_probit: return "bernoulli_probit";
    case Family::gaussian_identity: return "gaussian_identity";
  }
  return "unknown";
}

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
// Largest double below 1 and its mirror; keeps Bernoulli means inside (0,1).
constexpr double kMuMax = 1.0 - 0x1p-53;
constexpr double kMuMin = 0x1p-1022;

bool is_bernoulli(Family f) { return f != Family::gaussian_identity; }

// Per-observation quantities at linear predictor eta.
struct Pointwise {
  double mu;
  double log_mu;      // log mu (Bernoulli)
  double log_1m_mu;   // log (1 - mu) (Bernoulli)
  double d;           // d mu / d eta
  double d_over_v;    // d / V(mu)
  double d2_over_v;   // d^2 / V(mu), expected information weight
  double curvature;   // (d2 V - d^2 V') / V^2, observed-information correction
};

Pointwise pointwise(Family family, double eta) {
  Pointwise p{};
  switch (family) {
    case Family::gaussian_identity:
      p.mu = eta;
      p.d = 1.0;
      p.d_over_v = 1.0;
      p.d2_over_v = 1.0;
      p.curvature = 0.0;
      break;
    case Family::bernoulli_logit: {
      // mu = expit(eta); canonical link: d = V, so d/V = 1 and curvature = 0.
      double mu = eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
      double one_minus = eta >= 0 ? std::exp(-eta) / (1.0 + std::exp(-eta)) : 1.0 / (1.0 + std::exp(eta));
      p.mu = mu;
      p.log_mu = -std::log1p(std::exp(-std::abs(eta))) + std::min(eta, 0.0);
      p.log_1m_mu = -std::log1p(std::exp(-std::abs(eta))) - std::max(eta, 0.0);
      p.d = mu * one_minus;
      p.d_over_v = 1.0;
      p.d2_over_v = p.d;
      p.curvature = 0.0;
      break;
    }
    case Family::bernoulli_probit: {
      double mu = 0.5 * std::erfc(-eta * kInvSqrt2);
      double one_minus = 0.5 * std::erfc(eta * kInvSqrt2);
      double dens = kInvSqrt2Pi * std::exp(-0.5 * eta * eta);
      double v = mu * one_minus;
      p.mu = mu;
      p.log_mu = std::log(std::max(mu, std::numeric_limits<double>::min()));
      p.log_1m_mu = std::log(std::max(one_minus, std::numeric_limits<double>::min()));
      p.d = dens;
      if (v > 1e-300 && dens > 0.0) {
        p.d_over_v = dens / v;
        p.d2_over_v = dens * p.d_over_v;
        double d2 = -eta * dens;
        double dv = 1.0 - 2.0 * mu;
        p.curvature = (d2 * v - dens * dens * dv) / (v * v);
      } else {
        // Far tail: mills-ratio limits keep the score finite.
        p.d_over_v = std::abs(eta);
        p.d2_over_v = 0.0;
        p.curvature = 0.0;
      }
      break;
    }
  }
  return p;
}

struct State {
  Eigen::VectorXd eta;
  Eigen::VectorXd mu;
  Eigen::VectorXd weights;  // expected information weights incl. prior weights
  Eigen::VectorXd score;
  double deviance = 0.0;
};

double deviance_term(Family family, double y, const Pointwise& p) {
  if (family == Family::gaussian_identity) return (y - p.mu) * (y - p.mu);
  double t = 0.0;
  if (y > 0.0) t -= y * (p.log_mu - std::log(y));
  if (y < 1.0) t -= (1.0 - y) * (p.log_1m_mu - std::log1p(-y));
  return 2.0 * t;
}

State evaluate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Family family, const Eigen::VectorXd& pw,
               const Eigen::VectorXd& beta) {
  State s;
  s.eta = x * beta;
  const Eigen::Index n = y.size();
  s.mu.resize(n);
  s.weights.resize(n);
  Eigen::VectorXd u(n);
  double dev = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Pointwise p = pointwise(family, s.eta(i));
    s.mu(i) = p.mu;
    s.weights(i) = pw(i) * p.d2_over_v;
    u(i) = pw(i) * (y(i) - p.mu) * p.d_over_v;
    dev += pw(i) * deviance_term(family, y(i), p);
  }
  s.score = x.transpose() * u;
  s.deviance = dev;
  return s;
}

Eigen::MatrixXd weighted_crossprod(const Eigen::MatrixXd& x, const Eigen::VectorXd& w) {
  Eigen::MatrixXd xw = x.array().colwise() * w.array().sqrt();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(x.cols(), x.cols());
  h.selfadjointView<Eigen::Lower>().rankUpdate(xw.transpose());
  return h.selfadjointView<Eigen::Lower>();
}

void validate_inputs(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Family family, const Eigen::VectorXd& pw) {
  if (x.rows() != y.size() || pw.size() != y.size())
    throw Error(ErrorCode::DimensionMismatch, "design, response and weights must have equal row counts");
  if (x.rows() <= x.cols())
    throw Error(ErrorCode::InvalidArgument, "fit_glm needs more observations than coefficients");
  if (x.cols() < 1) throw Error(ErrorCode::InvalidArgument, "design has no columns");
  if (!(pw.array() > 0.0).all() || !pw.allFinite())
    throw Error(ErrorCode::InvalidArgument, "prior weights must be strictly positive and finite");
  if (!x.allFinite() || !y.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite design or response");
  if (is_bernoulli(family) && ((y.array() < 0.0).any() || (y.array() > 1.0).any()))
    throw Error(ErrorCode::InvalidArgument, "Bernoulli response must lie in [0, 1]");
}

// Normal quantile; the IRLS start only needs it on (0, 1).
double probit_link(double mu) {
  if (!(mu > 0.0)) return -std::numeric_limits<double>::infinity();
  if (!(mu < 1.0)) return std::numeric_limits<double>::infinity();
  return boost::math::quantile(boost::math::normal_distribution<>(), mu);
}

}  // namespace

namespace glm {

double inverse_link(Family family, double eta) noexcept { return pointwise(family, eta).mu; }

double link(Family family, double mu) noexcept {
  switch (family) {
    case Family::gaussian_identity: return mu;
    case Family::bernoulli_logit: return std::log(mu / (1.0 - mu));
    case Family::bernoulli_probit: return probit_link(mu);
  }
  return mu;
}

double mean_derivative(Family family, double eta) noexcept { return pointwise(family, eta).d; }

}  // namespace glm

Eigen::VectorXd glm_score(const Eigen::MatrixXd& design, const Eigen::VectorXd& response, Family family,
                          const Eigen::VectorXd& prior_weights, const Eigen::VectorXd& coefficients) {
  return evaluate(design, response, family, prior_weights, coefficients).score;
}

ModelFit fit_glm(const Eigen::MatrixXd& design, const Eigen::VectorXd& response, Family family,
                 const GlmOptions& options) {
  return fit_glm(design, response, family, Eigen::VectorXd::Ones(response.size()), options);
}

ModelFit fit_glm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Family family, const Eigen::VectorXd& pw,
                 const GlmOptions& options) {
  validate_inputs(x, y, family, pw);
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();

  // Start at the (adjusted) marginal mean on the link scale.
  double mean = pw.dot(y) / pw.sum();
  double adjusted = (mean * static_cast<double>(n) + 0.5) / (static_cast<double>(n) + 1.0);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  beta(0) = glm::link(family, family == Family::gaussian_identity ? mean : adjusted);

  State state = evaluate(x, y, family, pw, beta);
  ModelFit fit;
  fit.family = family;
  for (int it = 1; it <= options.max_iterations; ++it) {
    Eigen::LLT<Eigen::MatrixXd> llt(weighted_crossprod(x, state.weights));
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::RankDeficient, "weighted information matrix is singular");
    Eigen::VectorXd delta = llt.solve(state.score);
    if (!delta.allFinite()) throw Error(ErrorCode::RankDeficient, "non-finite IRLS step");

    Eigen::VectorXd candidate = beta + delta;
    State next = evaluate(x, y, family, pw, candidate);
    for (int half = 0; half < 30 && is_bernoulli(family) &&
                       (!std::isfinite(next.deviance) || next.deviance > state.deviance * (1.0 + 1e-12) + 1e-12);
         ++half) {
      delta *= 0.5;
      candidate = beta + delta;
      next = evaluate(x, y, family, pw, candidate);
    }
    if (is_bernoulli(family) && candidate.cwiseAbs().maxCoeff() > options.separation_threshold)
      throw Error(ErrorCode::SeparationDetected,
                  "coefficient magnitude exceeded " + std::to_string(options.separation_threshold));

    double change = std::abs(next.deviance - state.deviance);
    double scale = std::max(std::abs(next.deviance), std::numeric_limits<double>::min());
    bool deviance_settled = family == Family::gaussian_identity || change <= options.deviance_tolerance * scale;
    beta = std::move(candidate);
    state = std::move(next);
    fit.iterations = it;
    if (deviance_settled && state.score.cwiseAbs().maxCoeff() < options.score_tolerance) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged)
    throw Error(ErrorCode::NonConvergence, "IRLS did not converge in " + std::to_string(options.max_iterations) +
                                               " iterations (max |score| = " +
                                               std::to_string(state.score.cwiseAbs().maxCoeff()) + ")");

  // Observed information: expected weights minus the residual curvature term.
  Eigen::VectorXd observed(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Pointwise pt = pointwise(family, state.eta(i));
    observed(i) = pw(i) * (pt.d2_over_v - (y(i) - pt.mu) * pt.curvature);
  }
  Eigen::MatrixXd info;
  if ((observed.array() >= 0.0).all()) {
    info = weighted_crossprod(x, observed);
  } else {
    Eigen::MatrixXd xo = x.array().colwise() * observed.array();
    info = x.transpose() * xo;
  }
  if (family == Family::gaussian_identity) {
    double rss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) rss += pw(i) * (y(i) - state.mu(i)) * (y(i) - state.mu(i));
    fit.dispersion = rss / static_cast<double>(n - p);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all())
    throw Error(ErrorCode::RankDeficient, "observed information is not positive definite");
  Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(p, p)) * fit.dispersion;
  fit.covariance = 0.5 * (cov + cov.transpose());
  fit.coefficients = std::move(beta);
  fit.deviance = state.deviance;
  return fit;
}

Eigen::VectorXd predict_mean(const ModelFit& fit, const Eigen::MatrixXd& rows) {
  if (rows.cols() != fit.coefficients.size())
    throw Error(ErrorCode::DimensionMismatch, "design rows have " + std::to_string(rows.cols()) +
                                                  " columns, model has " + std::to_string(fit.coefficients.size()));
  Eigen::VectorXd eta = rows * fit.coefficients;
  Eigen::VectorXd mu(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    mu(i) = glm::inverse_link(fit.family, eta(i));
    if (is_bernoulli(fit.family)) mu(i) = std::clamp(mu(i), kMuMin, kMuMax);
  }
  return mu;
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& covariance) {
  const Eigen::Index p = covariance.rows();
  if (covariance.cols() != p) throw Error(ErrorCode::DimensionMismatch, "covariance must be square");
  double scale = std::max(covariance.diagonal().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  for (double ridge : {0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8}) {
    Eigen::MatrixXd s = covariance;
    s.diagonal().array() += ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
    if (ldlt.info() != Eigen::Success) continue;
    Eigen::VectorXd d = ldlt.vectorD();
    if ((d.array() < -1e-12 * scale).any() || !d.allFinite()) continue;
    Eigen::VectorXd root = d.cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd l = ldlt.matrixL();
    Eigen::MatrixXd factor = l * root.asDiagonal();
    return ldlt.transpositionsP().transpose() * factor;
  }
  throw Error(ErrorCode::CovarianceNotPSD, "covariance is not positive semidefinite after ridge 1e-8");
}

Eigen::VectorXd sample_coefficients(const Eigen::VectorXd& mean, const Eigen::MatrixXd& factor, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = normal(rng);
  return mean + factor * z;
}

Eigen::VectorXd sample_coefficients(const ModelFit& fit, Rng& rng) {
  if (!fit.converged) throw Error(ErrorCode::InvalidArgument, "cannot sample from an unconverged fit");
  return sample_coefficients(fit.coefficients, psd_factor(fit.covariance), rng);
}

}  // namespace confex
