#pragma once

#include "confex/perturbation.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace confex {

// Natural cubic spline in the truncated-power basis
//   N_1 = 1, N_2 = x, N_{k+2} = d_k - d_{K'-1},
//   d_k(x) = ((x - t_k)^3_+ - (x - t_{K'})^3_+) / (t_{K'} - t_k),
// over K' = K + 2 knots t_1 < ... < t_{K'} (boundary knots at the data range).
struct SplineFit {
  int interior_knots = 0;
  std::vector<double> knots;  // all K + 2 knots, boundaries included
  Eigen::VectorXd coefficients;

  double x_min() const { return knots.front(); }
  double x_max() const { return knots.back(); }
  // Linear continuation outside [x_min, x_max].
  double operator()(double x) const;
  double derivative(double x) const;
  double second_derivative(double x) const;
};

// Boundary knots at lo and hi with `interior` evenly spaced knots between.
std::vector<double> spline_knots(double lo, double hi, int interior);

// Basis matrix: one row per x, one column per knot.
Eigen::MatrixXd natural_spline_basis(std::span<const double> x, std::span<const double> knots);

// Least-squares fit on a fixed design; factorizes once and fits many responses.
class NaturalSplineSmoother {
 public:
  // Throws InvalidArgument, DegenerateX (x not strictly increasing) or
  // TooManyKnots (K + 2 > x.size()).
  NaturalSplineSmoother(std::span<const double> x, int interior_knots);

  SplineFit fit(std::span<const double> y) const;
  // Fitted values at the design points.
  Eigen::VectorXd fitted(std::span<const double> y) const;

 private:
  std::vector<double> knots_;
  int interior_;
  Eigen::MatrixXd basis_;
  Eigen::VectorXd column_scale_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
};

SplineFit fit_natural_spline(std::span<const double> x, std::span<const double> y, int interior_knots);

// Largest admissible interior knot count for J + 1 orbits.
int max_interior_knots(int J);
// 1 .. ceil(J / 2).
std::vector<int> default_q_values(int J);

// Cross-validated interior knot count: splines fitted to each perturbed
// estimate sequence are scored by mean squared error against the observed
// sequence; ties go to the larger K.
int select_knots_cv(const TrajectoryEnsemble& ensemble, std::span<const int> candidate_K);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool contains(double v) const { return lower <= v && v <= upper; }
};

// ceil(p * m)-th smallest value (1-based, at least the first).
double nearest_rank_percentile(std::span<const double> values, double p);

// Drops floor(trim * m) lowest lower endpoints and floor(trim * m) highest
// upper endpoints, then takes the alpha/2 percentile of the lowers and the
// 1 - alpha/2 percentile of the uppers.
Interval uncertainty_interval(std::span<const double> lowers, std::span<const double> uppers, double trim,
                              double alpha);

struct TrajectorySplines {
  SplineFit estimate;
  SplineFit lower;
  SplineFit upper;
};

struct ExtrapolationResult {
  int J = 0;
  int interior_knots = 0;
  double trim = 0.0;
  double alpha = 0.05;
  std::vector<int> q_values;
  // Row 0 is the observed trajectory, rows 1..B the perturbed ones.
  std::vector<TrajectorySplines> fits;
  Eigen::MatrixXd predicted_effects;  // trajectories x q
  Eigen::MatrixXd predicted_lower;
  Eigen::MatrixXd predicted_upper;
  std::vector<Interval> uncertainty_intervals;  // per q
  std::vector<Interval> effect_spread;          // alpha/2, 1 - alpha/2 percentiles of perturbed predictions
  // Whether the observed full-set CI contains zero; crossing_q is the first
  // probed q whose uncertainty interval classifies differently.
  bool baseline_contains_zero = false;
  std::optional<int> crossing_q;
};

ExtrapolationResult extrapolate_ensemble(const TrajectoryEnsemble& ensemble, int interior_knots,
                                         std::span<const int> q_values, double trim = 0.05, double alpha = 0.05);

}  // namespace confex
