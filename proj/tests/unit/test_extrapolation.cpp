#include "confex/error.hpp"
#include "confex/extrapolation.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <numeric>
#include <random>

using namespace confex;

namespace {

Trajectory hand_trajectory(const std::vector<double>& est, const std::vector<double>& lo,
                           const std::vector<double>& hi) {
  Trajectory t;
  for (std::size_t j = 0; j < est.size(); ++j) {
    OrbitEstimate o;
    o.estimate = est[j];
    o.ci_lower = lo[j];
    o.ci_upper = hi[j];
    t.orbits.push_back(o);
  }
  return t;
}

std::vector<double> axis(int J) {
  std::vector<double> x;
  for (int j = 0; j <= J; ++j) x.push_back(j);
  return x;
}

}  // namespace

TEST_CASE("linear functions extrapolate exactly") {
  for (int J : {3, 8, 16}) {
    auto x = axis(J);
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 * v + 1.0);
    for (int K = 0; K <= max_interior_knots(J); ++K) {
      SplineFit s = fit_natural_spline(x, y, K);
      const double far = J + 5.0;
      CHECK(std::abs(s(far) - (3.0 * far + 1.0)) < 1e-8);
      CHECK(std::abs(s(-2.0) - (-5.0)) < 1e-8);
    }
  }
}

TEST_CASE("max knots interpolate") {
  std::vector<double> x{0, 1, 2, 3};
  std::vector<double> y{0.4, -1.0, 2.5, 0.7};
  SplineFit s = fit_natural_spline(x, y, 2);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(s(x[i]) - y[i]) < 1e-8);

  Rng rng(3);
  std::normal_distribution<double> z(0.0, 1.0);
  auto x17 = axis(16);
  std::vector<double> y17;
  for (std::size_t i = 0; i < x17.size(); ++i) y17.push_back(z(rng));
  SplineFit s17 = fit_natural_spline(x17, y17, max_interior_knots(16));
  for (std::size_t i = 0; i < x17.size(); ++i) CHECK(std::abs(s17(x17[i]) - y17[i]) < 1e-8);
  CHECK_THROWS_AS(fit_natural_spline(x, y, 3), Error);
}

TEST_CASE("basis matches the truncated-power oracle") {
  const std::vector<double> probes{-0.5, 0.0, 0.8, 1.7, 3.0};
  for (int K : {0, 1, 2, 5}) {
    const auto knots = spline_knots(0.0, 3.0, K);
    Eigen::MatrixXd b = natural_spline_basis(probes, knots);
    auto ref = oracle::truncated_power_basis(probes, knots);
    for (std::size_t i = 0; i < probes.size(); ++i)
      for (std::size_t k = 0; k < knots.size(); ++k)
        CHECK(std::abs(b(static_cast<Index>(i), static_cast<Index>(k)) - ref[i][k]) < 1e-10);
  }
  const auto k1 = spline_knots(0.0, 3.0, 1);
  CHECK(k1 == std::vector<double>{0.0, 1.5, 3.0});
}

TEST_CASE("extrapolation is linear beyond the last orbit") {
  Rng rng(8);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int J = 4 + trial % 9;
    auto x = axis(J);
    std::vector<double> y;
    for (std::size_t i = 0; i < x.size(); ++i) y.push_back(z(rng));
    SplineFit s = fit_natural_spline(x, y, trial % (J - 1));
    const double d2 = s(J + 1.0) - 2.0 * s(J + 2.0) + s(J + 3.0);
    CHECK(std::abs(d2) < 1e-8);
    // Continuity of value and slope at the boundary.
    CHECK(std::abs(s(J + 1e-7) - s(J)) < 1e-5);
    CHECK(s.second_derivative(J + 0.5) == 0.0);
  }
}

TEST_CASE("design validation") {
  std::vector<double> bad{0, 2, 1};
  std::vector<double> y{1, 2, 3};
  CHECK_THROWS_AS(fit_natural_spline(bad, y, 0), Error);
  std::vector<double> two{0, 1};
  CHECK_THROWS_AS(fit_natural_spline(two, y, 0), Error);
  CHECK(default_q_values(16).size() == 8);
  CHECK(default_q_values(5) == std::vector<int>{1, 2, 3});
  CHECK(max_interior_knots(16) == 15);
}

TEST_CASE("nearest-rank percentiles match the sort-and-index oracle") {
  Rng rng(77);
  std::normal_distribution<double> z(0.0, 1.0);
  for (std::size_t m : {3u, 40u, 501u}) {
    std::vector<double> lo, hi;
    for (std::size_t i = 0; i < m; ++i) {
      double c = z(rng);
      lo.push_back(c - std::abs(z(rng)));
      hi.push_back(c + std::abs(z(rng)));
    }
    CHECK(nearest_rank_percentile(lo, 0.025) == oracle::sorted_rank(lo, 1, 40));
    CHECK(nearest_rank_percentile(hi, 0.975) == oracle::sorted_rank(hi, 39, 40));
    Interval ui = uncertainty_interval(lo, hi, 0.0, 0.05);
    CHECK(ui.lower == oracle::sorted_rank(lo, 1, 40));
    CHECK(ui.upper == oracle::sorted_rank(hi, 39, 40));

    // Trim: drop floor(0.05 m) extremes from each list, then index.
    const std::size_t drop = (m * 5) / 100;
    std::vector<double> slo = lo, shi = hi;
    std::sort(slo.begin(), slo.end());
    std::sort(shi.begin(), shi.end());
    std::vector<double> tlo(slo.begin() + static_cast<std::ptrdiff_t>(drop), slo.end());
    std::vector<double> thi(shi.begin(), shi.end() - static_cast<std::ptrdiff_t>(drop));
    Interval tu = uncertainty_interval(lo, hi, 0.05, 0.05);
    CHECK(tu.lower == oracle::sorted_rank(tlo, 1, 40));
    CHECK(tu.upper == oracle::sorted_rank(thi, 39, 40));

    double prev_lo = -INFINITY, prev_hi = INFINITY;
    for (double trim : {0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 0.45}) {
      Interval t = uncertainty_interval(lo, hi, trim, 0.05);
      CHECK(t.lower >= prev_lo);
      CHECK(t.upper <= prev_hi);
      prev_lo = t.lower;
      prev_hi = t.upper;
    }
  }
}

TEST_CASE("constant trajectories extrapolate to themselves") {
  const int J = 6;
  const double c = 0.3, d = 0.1;
  TrajectoryEnsemble e;
  std::vector<double> est(J + 1, c), lo(J + 1, c - d), hi(J + 1, c + d);
  e.observed = hand_trajectory(est, lo, hi);
  e.perturbed.assign(20, hand_trajectory(est, lo, hi));
  e.B = 20;
  const int qs[] = {1, 2, 3};
  for (int K : {0, 2, 5}) {
    auto r = extrapolate_ensemble(e, K, qs);
    for (const auto& ui : r.uncertainty_intervals) {
      CHECK(ui.lower == doctest::Approx(c - d).epsilon(1e-10));
      CHECK(ui.upper == doctest::Approx(c + d).epsilon(1e-10));
    }
    CHECK_FALSE(r.crossing_q.has_value());
    CHECK_FALSE(r.baseline_contains_zero);
  }
}

TEST_CASE("40 hand-built trajectories against the percentile oracle") {
  // Linear trajectories, so each prediction at J + q is known in closed form.
  const int J = 5;
  TrajectoryEnsemble e;
  std::vector<double> plo, phi, peff;
  const int q = 2;
  for (int t = 0; t < 40; ++t) {
    const double slope = 0.01 * ((t * 7) % 13 - 6);
    const double a = 0.05 * ((t * 11) % 17 - 8);
    const double w = 0.1 + 0.02 * ((t * 5) % 9);
    std::vector<double> est, lo, hi;
    for (int j = 0; j <= J; ++j) {
      est.push_back(a + slope * j);
      lo.push_back(a + slope * j - w);
      hi.push_back(a + slope * j + w + 0.01 * j);
    }
    auto tr = hand_trajectory(est, lo, hi);
    const double x = J + q;
    plo.push_back(a + slope * x - w);
    phi.push_back(a + slope * x + w + 0.01 * x);
    peff.push_back(a + slope * x);
    if (t == 0)
      e.observed = tr;
    else
      e.perturbed.push_back(tr);
  }
  e.B = 39;
  const int qs[] = {q};
  auto r = extrapolate_ensemble(e, 2, qs, 0.0, 0.05);
  // Exact values are compared against oracle values of the closed-form
  // predictions to spline round-off.
  CHECK(r.uncertainty_intervals[0].lower == doctest::Approx(oracle::sorted_rank(plo, 1, 40)).epsilon(1e-9));
  CHECK(r.uncertainty_intervals[0].upper == doctest::Approx(oracle::sorted_rank(phi, 39, 40)).epsilon(1e-9));
  // Percentiles of the library's own predictions are bit-identical to the oracle.
  std::vector<double> lo(r.predicted_lower.col(0).begin(), r.predicted_lower.col(0).end());
  std::vector<double> hi(r.predicted_upper.col(0).begin(), r.predicted_upper.col(0).end());
  CHECK(r.uncertainty_intervals[0].lower == oracle::sorted_rank(lo, 1, 40));
  CHECK(r.uncertainty_intervals[0].upper == oracle::sorted_rank(hi, 39, 40));
  std::vector<double> pe(r.predicted_effects.col(0).begin() + 1, r.predicted_effects.col(0).end());
  CHECK(r.effect_spread[0].lower == oracle::sorted_rank(pe, 1, 40));
  CHECK(r.effect_spread[0].upper == oracle::sorted_rank(pe, 39, 40));
}

TEST_CASE("crossing horizon") {
  // Observed CI excludes zero; lower endpoints fall by 0.05 per orbit.
  const int J = 4;
  std::vector<double> est, lo, hi;
  for (int j = 0; j <= J; ++j) {
    est.push_back(0.5 - 0.05 * j);
    lo.push_back(0.32 - 0.05 * j);
    hi.push_back(0.7 - 0.05 * j);
  }
  TrajectoryEnsemble e;
  e.observed = hand_trajectory(est, lo, hi);
  e.perturbed.assign(5, e.observed);
  e.B = 5;
  const int qs[] = {1, 2, 3, 4, 5, 6};
  auto r = extrapolate_ensemble(e, 0, qs, 0.0);
  // Lower endpoint at J + q is 0.32 - 0.05 (4 + q): below zero from q = 3.
  REQUIRE(r.crossing_q.has_value());
  CHECK(*r.crossing_q == 3);
  CHECK(r.predicted_effects.rows() == 6);
}

TEST_CASE("cross-validated knots") {
  const int J = 16;
  auto x = axis(J);
  {
    TrajectoryEnsemble e;
    e.observed = hand_trajectory(x, x, x);
    e.perturbed.assign(3, e.observed);
    const int only[] = {3};
    CHECK(select_knots_cv(e, only) == 3);
  }
  int smooth = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng rng(1000 + s);
    std::normal_distribution<double> z(0.0, 0.02);
    auto noisy = [&] {
      std::vector<double> v;
      for (double xi : x) v.push_back(0.1 + 0.01 * xi - 0.0008 * xi * xi + z(rng));
      return v;
    };
    TrajectoryEnsemble e;
    auto o = noisy();
    e.observed = hand_trajectory(o, o, o);
    for (int b = 0; b < 30; ++b) {
      auto p = noisy();
      e.perturbed.push_back(hand_trajectory(p, p, p));
    }
    std::vector<int> cand(J);
    std::iota(cand.begin(), cand.end(), 0);
    if (select_knots_cv(e, cand) < max_interior_knots(J)) ++smooth;
  }
  CHECK(smooth >= 40);
}
