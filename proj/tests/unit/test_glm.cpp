#include "confex/error.hpp"
#include "confex/glm.hpp"
#include "synth.hpp"

#include <doctest.h>

#include <random>

using namespace confex;

namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd d(x.rows(), x.cols() + 1);
  d.col(0).setOnes();
  d.rightCols(x.cols()) = x;
  return d;
}

struct Logistic {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

Logistic logistic_data(int n, std::uint64_t seed, Eigen::Vector3d beta = {-0.3, 0.8, -0.5}) {
  Rng rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Logistic d{Eigen::MatrixXd(n, 3), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    d.X.row(i) << 1.0, z(rng), z(rng);
    d.y(i) = u(rng) < synth::expit(d.X.row(i).dot(beta)) ? 1.0 : 0.0;
  }
  return d;
}

}  // namespace

TEST_CASE("intercept-only logit on balanced response") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(6, 1);
  Eigen::VectorXd y(6);
  y << 0, 1, 0, 1, 0, 1;
  ModelFit f = fit_glm(X, y, Family::bernoulli_logit);
  CHECK(f.converged);
  CHECK(f.coefficients(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(predict_mean(f, X)(0) == doctest::Approx(0.5));
}

TEST_CASE("gaussian intercept-only mean and variance") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(3, 1);
  Eigen::VectorXd y(3);
  y << 1, 2, 3;
  ModelFit f = fit_glm(X, y, Family::gaussian_identity);
  CHECK(f.coefficients(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.covariance(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("perfect separation is detected") {
  Rng rng(4);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd X(200, 2);
  Eigen::VectorXd y(200);
  for (int i = 0; i < 200; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = z(rng);
    y(i) = X(i, 1) > 0 ? 1.0 : 0.0;
  }
  try {
    fit_glm(X, y, Family::bernoulli_logit);
    FAIL("expected SeparationDetected");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SeparationDetected);
  }
}

TEST_CASE("rank deficient design") {
  Eigen::MatrixXd X(5, 3);
  X << 1, 1, 2, 1, 2, 4, 1, 3, 6, 1, 4, 8, 1, 5, 10;
  Eigen::VectorXd y(5);
  y << 1, 2, 3, 2, 1;
  try {
    fit_glm(X, y, Family::gaussian_identity);
    FAIL("expected RankDeficient");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RankDeficient);
  }
}

TEST_CASE("predict_mean examples") {
  ModelFit f;
  f.coefficients = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd rows(3, 2);
  rows << 1, -2, 1, 0, 1, 5;
  f.family = Family::bernoulli_logit;
  CHECK(predict_mean(f, rows).isApproxToConstant(0.5));
  f.family = Family::bernoulli_probit;
  CHECK(predict_mean(f, rows).isApproxToConstant(0.5));

  f.family = Family::gaussian_identity;
  f.coefficients << 1, 2;
  Eigen::MatrixXd r(1, 2);
  r << 1, 3;
  CHECK(predict_mean(f, r)(0) == 7.0);

  Eigen::MatrixXd bad(1, 3);
  bad << 1, 2, 3;
  CHECK_THROWS_AS(predict_mean(f, bad), Error);
}

TEST_CASE("weighted gaussian fit matches the normal equations") {
  Rng rng(21);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.2, 5.0);
  const int n = 400;
  Eigen::MatrixXd X(n, 4);
  Eigen::VectorXd y(n), w(n);
  for (int i = 0; i < n; ++i) {
    X.row(i) << 1.0, z(rng), z(rng) * 3.0, z(rng) + 2.0;
    y(i) = 1.0 + 0.5 * X(i, 1) - 2.0 * X(i, 2) + X(i, 3) + z(rng);
    w(i) = u(rng);
  }
  ModelFit f = fit_glm(X, y, Family::gaussian_identity, w);
  // Oracle: (X'WX) b = X'Wy via an LU solve, written out directly.
  Eigen::MatrixXd xtwx = X.transpose() * w.asDiagonal() * X;
  Eigen::VectorXd xtwy = X.transpose() * w.asDiagonal() * y;
  Eigen::VectorXd b = xtwx.partialPivLu().solve(xtwy);
  CHECK((f.coefficients - b).norm() / b.norm() < 1e-8);
  const double rss = (w.array() * (y - X * b).array().square()).sum();
  Eigen::MatrixXd cov = rss / (n - 4) * xtwx.inverse();
  CHECK((f.covariance - cov).norm() / cov.norm() < 1e-8);
}

TEST_CASE("logit score vanishes at the optimum") {
  auto d = logistic_data(2000, 8);
  ModelFit f = fit_glm(d.X, d.y, Family::bernoulli_logit);
  CHECK(f.converged);
  Eigen::VectorXd mu(d.y.size());
  for (Index i = 0; i < mu.size(); ++i) mu(i) = synth::expit(d.X.row(i).dot(f.coefficients));
  Eigen::VectorXd score = d.X.transpose() * (d.y - mu);
  CHECK(score.cwiseAbs().maxCoeff() < 1e-6);
  CHECK(glm_score(d.X, d.y, Family::bernoulli_logit, Eigen::VectorXd::Ones(d.y.size()), f.coefficients)
            .cwiseAbs()
            .maxCoeff() < 1e-6);
  // Covariance is the inverse of X' diag(mu(1-mu)) X.
  Eigen::MatrixXd info = d.X.transpose() * (mu.array() * (1.0 - mu.array())).matrix().asDiagonal() * d.X;
  CHECK((f.covariance - info.inverse()).norm() / f.covariance.norm() < 1e-6);
  CHECK((f.covariance - f.covariance.transpose()).norm() <= 1e-10 * f.covariance.norm());
}

TEST_CASE("probit and logit agree on the marginal rate") {
  auto d = logistic_data(1500, 3);
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(d.y.size(), 1);
  ModelFit fl = fit_glm(ones, d.y, Family::bernoulli_logit);
  ModelFit fp = fit_glm(ones, d.y, Family::bernoulli_probit);
  const double rate = d.y.mean();
  CHECK(predict_mean(fl, ones).mean() == doctest::Approx(rate).epsilon(1e-6));
  CHECK(predict_mean(fp, ones).mean() == doctest::Approx(rate).epsilon(1e-6));

  // With covariates the logit mean of fitted values is exact; probit is close.
  ModelFit gl = fit_glm(d.X, d.y, Family::bernoulli_logit);
  ModelFit gp = fit_glm(d.X, d.y, Family::bernoulli_probit);
  CHECK(gp.converged);
  CHECK(predict_mean(gl, d.X).mean() == doctest::Approx(rate).epsilon(1e-8));
  CHECK(std::abs(predict_mean(gp, d.X).mean() - rate) < 5e-3);
}

TEST_CASE("sampling: zero covariance, determinism, moments") {
  auto d = logistic_data(800, 5);
  ModelFit f = fit_glm(d.X, d.y, Family::bernoulli_logit);

  ModelFit z = f;
  z.covariance.setZero();
  Rng r0(1);
  CHECK(sample_coefficients(z, r0) == f.coefficients);

  Rng a(99), b(99);
  CHECK(sample_coefficients(f, a) == sample_coefficients(f, b));

  const int draws = 50000;
  Rng rng(12345);
  const Eigen::MatrixXd factor = psd_factor(f.covariance);
  Eigen::MatrixXd samples(draws, 3);
  for (int k = 0; k < draws; ++k) samples.row(k) = sample_coefficients(f.coefficients, factor, rng).transpose();
  Eigen::VectorXd mean = samples.colwise().mean().transpose();
  for (int j = 0; j < 3; ++j) {
    // First 10,000 draws: mean within 4 standard errors.
    const double m10 = samples.col(j).head(10000).mean();
    CHECK(std::abs(m10 - f.coefficients(j)) < 4.0 * std::sqrt(f.covariance(j, j) / 10000));
  }
  Eigen::MatrixXd centered = samples.rowwise() - mean.transpose();
  Eigen::MatrixXd emp = centered.transpose() * centered / (draws - 1);
  CHECK((emp - f.covariance).norm() / f.covariance.norm() < 0.05);
}

TEST_CASE("psd factor repairs a singular covariance") {
  Eigen::MatrixXd c(2, 2);
  c << 1, 1, 1, 1;
  Eigen::MatrixXd l = psd_factor(c);
  CHECK((l * l.transpose() - c).norm() < 1e-6);
  Eigen::MatrixXd neg(2, 2);
  neg << 1, 0, 0, -1;
  CHECK_THROWS_AS(psd_factor(neg), Error);
}

TEST_CASE("link helpers") {
  for (double eta : {-3.0, -0.4, 0.0, 1.7}) {
    for (Family fam : {Family::bernoulli_logit, Family::bernoulli_probit, Family::gaussian_identity}) {
      const double mu = glm::inverse_link(fam, eta);
      CHECK(glm::link(fam, mu) == doctest::Approx(eta).epsilon(1e-9));
      const double h = 1e-6;
      const double num = (glm::inverse_link(fam, eta + h) - glm::inverse_link(fam, eta - h)) / (2 * h);
      CHECK(glm::mean_derivative(fam, eta) == doctest::Approx(num).epsilon(1e-6));
    }
  }
}
