#include "confex/extrapolation.hpp"

#include "confex/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace confex {

namespace {

// Row of basis values (order 0), first (1) or second (2) derivatives at x.
void basis_row(double x, std::span<const double> t, int order, double* out) {
  const std::size_t m = t.size();
  auto pos = [order](double u) {
    if (u <= 0.0) return 0.0;
    switch (order) {
      case 0: return u * u * u;
      case 1: return 3.0 * u * u;
      default: return 6.0 * u;
    }
  };
  out[0] = order == 0 ? 1.0 : 0.0;
  out[1] = order == 0 ? x : (order == 1 ? 1.0 : 0.0);
  if (m < 3) return;
  const double last = t[m - 1];
  const double tail = pos(x - last);
  auto d = [&](std::size_t k) { return (pos(x - t[k]) - tail) / (last - t[k]); };
  const double d_ref = d(m - 2);
  for (std::size_t k = 0; k + 2 < m; ++k) out[k + 2] = d(k) - d_ref;
}

double combine(const SplineFit& s, double x, int order) {
  std::vector<double> row(s.knots.size());
  basis_row(x, s.knots, order, row.data());
  double v = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k) v += row[k] * s.coefficients(static_cast<Index>(k));
  return v;
}

}  // namespace

double SplineFit::operator()(double x) const {
  if (x > x_max()) return combine(*this, x_max(), 0) + combine(*this, x_max(), 1) * (x - x_max());
  if (x < x_min()) return combine(*this, x_min(), 0) + combine(*this, x_min(), 1) * (x - x_min());
  return combine(*this, x, 0);
}

double SplineFit::derivative(double x) const {
  return combine(*this, std::clamp(x, x_min(), x_max()), 1);
}

double SplineFit::second_derivative(double x) const {
  if (x >= x_max() || x <= x_min()) return 0.0;
  return combine(*this, x, 2);
}

std::vector<double> spline_knots(double lo, double hi, int interior) {
  if (interior < 0) throw Error(ErrorCode::InvalidArgument, "interior knot count must be non-negative");
  if (!(hi > lo)) throw Error(ErrorCode::DegenerateX, "boundary knots must satisfy lo < hi");
  std::vector<double> knots(static_cast<std::size_t>(interior) + 2);
  const double step = (hi - lo) / static_cast<double>(interior + 1);
  for (int k = 0; k <= interior + 1; ++k) knots[static_cast<std::size_t>(k)] = lo + step * k;
  knots.back() = hi;
  return knots;
}

Eigen::MatrixXd natural_spline_basis(std::span<const double> x, std::span<const double> knots) {
  if (knots.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two knots");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> b(static_cast<Index>(x.size()),
                                                                           static_cast<Index>(knots.size()));
  for (std::size_t i = 0; i < x.size(); ++i) basis_row(x[i], knots, 0, b.row(static_cast<Index>(i)).data());
  return b;
}

NaturalSplineSmoother::NaturalSplineSmoother(std::span<const double> x, int interior_knots)
    : interior_(interior_knots) {
  if (x.size() < 2) throw Error(ErrorCode::InvalidArgument, "spline fit needs at least two points");
  if (interior_knots < 0) throw Error(ErrorCode::InvalidArgument, "interior knot count must be non-negative");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw Error(ErrorCode::DegenerateX, "non-finite predictor");
    if (i > 0 && !(x[i] > x[i - 1])) throw Error(ErrorCode::DegenerateX, "predictor must be strictly increasing");
  }
  if (static_cast<std::size_t>(interior_knots) + 2 > x.size())
    throw Error(ErrorCode::TooManyKnots, std::to_string(interior_knots) + " interior knots need at least " +
                                             std::to_string(interior_knots + 2) + " points");
  knots_ = spline_knots(x.front(), x.back(), interior_knots);
  basis_ = natural_spline_basis(x, knots_);
  column_scale_ = basis_.colwise().norm().transpose();
  Eigen::MatrixXd scaled = basis_ * column_scale_.cwiseInverse().asDiagonal();
  qr_.compute(scaled);
  if (qr_.rank() < scaled.cols()) throw Error(ErrorCode::DegenerateX, "spline basis is rank deficient");
}

SplineFit NaturalSplineSmoother::fit(std::span<const double> y) const {
  if (static_cast<Index>(y.size()) != basis_.rows())
    throw Error(ErrorCode::LengthMismatch, "response length does not match predictor length");
  Eigen::Map<const Eigen::VectorXd> response(y.data(), static_cast<Index>(y.size()));
  if (!response.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite spline response");
  SplineFit out;
  out.interior_knots = interior_;
  out.knots = knots_;
  out.coefficients = qr_.solve(response).cwiseQuotient(column_scale_);
  return out;
}

Eigen::VectorXd NaturalSplineSmoother::fitted(std::span<const double> y) const {
  return basis_ * fit(y).coefficients;
}

SplineFit fit_natural_spline(std::span<const double> x, std::span<const double> y, int interior_knots) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "x and y lengths differ");
  return NaturalSplineSmoother(x, interior_knots).fit(y);
}

int max_interior_knots(int J) { return std::max(J - 1, 0); }

std::vector<int> default_q_values(int J) {
  std::vector<int> q;
  for (int v = 1; v <= (J + 1) / 2; ++v) q.push_back(v);
  if (q.empty()) q.push_back(1);
  return q;
}

namespace {

std::vector<double> orbit_axis(int J) {
  std::vector<double> x(static_cast<std::size_t>(J) + 1);
  for (int j = 0; j <= J; ++j) x[static_cast<std::size_t>(j)] = j;
  return x;
}

std::vector<double> column(const Trajectory& t, double OrbitEstimate::*field) {
  std::vector<double> v;
  v.reserve(t.orbits.size());
  for (const auto& o : t.orbits) v.push_back(o.*field);
  return v;
}

void check_shape(const TrajectoryEnsemble& ensemble) {
  const auto orbits = ensemble.observed.orbits.size();
  if (orbits < 2) throw Error(ErrorCode::InvalidArgument, "trajectory needs at least two orbits");
  for (const auto& t : ensemble.perturbed)
    if (t.orbits.size() != orbits) throw Error(ErrorCode::LengthMismatch, "trajectories differ in orbit count");
}

}  // namespace

int select_knots_cv(const TrajectoryEnsemble& ensemble, std::span<const int> candidate_K) {
  if (candidate_K.empty()) throw Error(ErrorCode::InvalidArgument, "no candidate knot counts");
  check_shape(ensemble);
  if (ensemble.perturbed.empty()) throw Error(ErrorCode::InvalidArgument, "cross-validation needs perturbed trajectories");
  const int J = static_cast<int>(ensemble.observed.orbits.size()) - 1;
  const auto x = orbit_axis(J);
  std::vector<double> observed = column(ensemble.observed, &OrbitEstimate::estimate);
  Eigen::Map<const Eigen::VectorXd> target(observed.data(), static_cast<Index>(observed.size()));

  int best_k = -1;
  double best = std::numeric_limits<double>::infinity();
  for (int K : candidate_K) {
    NaturalSplineSmoother smoother(x, K);
    double total = 0.0;
    for (const auto& t : ensemble.perturbed) {
      std::vector<double> y = column(t, &OrbitEstimate::estimate);
      total += (smoother.fitted(y) - target).squaredNorm() / static_cast<double>(x.size());
    }
    double score = total / static_cast<double>(ensemble.perturbed.size());
    double tol = 1e-12 * std::max(std::abs(best), std::abs(score));
    if (best_k < 0 || score < best - tol || (std::abs(score - best) <= tol && K > best_k)) {
      if (best_k < 0 || score < best - tol) best = score;
      best_k = K;
    }
  }
  return best_k;
}

double nearest_rank_percentile(std::span<const double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "percentile of an empty list");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "percentile level must lie in [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double m = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * m - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

Interval uncertainty_interval(std::span<const double> lowers, std::span<const double> uppers, double trim,
                              double alpha) {
  if (lowers.empty() || lowers.size() != uppers.size())
    throw Error(ErrorCode::LengthMismatch, "endpoint lists must be non-empty and of equal length");
  if (!(trim >= 0.0 && trim < 0.5)) throw Error(ErrorCode::InvalidArgument, "trim must lie in [0, 0.5)");
  const auto drop = static_cast<std::size_t>(std::floor(trim * static_cast<double>(lowers.size()) + 1e-9));
  std::vector<double> lo(lowers.begin(), lowers.end());
  std::vector<double> hi(uppers.begin(), uppers.end());
  std::sort(lo.begin(), lo.end());
  std::sort(hi.begin(), hi.end());
  lo.erase(lo.begin(), lo.begin() + static_cast<std::ptrdiff_t>(drop));
  hi.resize(hi.size() - drop);
  return Interval{nearest_rank_percentile(lo, alpha / 2.0), nearest_rank_percentile(hi, 1.0 - alpha / 2.0)};
}

ExtrapolationResult extrapolate_ensemble(const TrajectoryEnsemble& ensemble, int interior_knots,
                                         std::span<const int> q_values, double trim, double alpha) {
  check_shape(ensemble);
  if (q_values.empty()) throw Error(ErrorCode::InvalidArgument, "no extrapolation horizons");
  for (int q : q_values)
    if (q < 1) throw Error(ErrorCode::InvalidArgument, "extrapolation horizons must be positive");
  if (!(trim >= 0.0 && trim < 0.5)) throw Error(ErrorCode::InvalidArgument, "trim must lie in [0, 0.5)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");

  const int J = static_cast<int>(ensemble.observed.orbits.size()) - 1;
  const auto x = orbit_axis(J);
  NaturalSplineSmoother smoother(x, interior_knots);

  ExtrapolationResult out;
  out.J = J;
  out.interior_knots = interior_knots;
  out.trim = trim;
  out.alpha = alpha;
  out.q_values.assign(q_values.begin(), q_values.end());
  std::sort(out.q_values.begin(), out.q_values.end());

  const std::size_t T = ensemble.perturbed.size() + 1;
  const Index Q = static_cast<Index>(out.q_values.size());
  out.fits.reserve(T);
  out.predicted_effects.resize(static_cast<Index>(T), Q);
  out.predicted_lower.resize(static_cast<Index>(T), Q);
  out.predicted_upper.resize(static_cast<Index>(T), Q);
  for (std::size_t t = 0; t < T; ++t) {
    const Trajectory& traj = t == 0 ? ensemble.observed : ensemble.perturbed[t - 1];
    TrajectorySplines s{smoother.fit(column(traj, &OrbitEstimate::estimate)),
                        smoother.fit(column(traj, &OrbitEstimate::ci_lower)),
                        smoother.fit(column(traj, &OrbitEstimate::ci_upper))};
    for (Index k = 0; k < Q; ++k) {
      double at = J + out.q_values[static_cast<std::size_t>(k)];
      out.predicted_effects(static_cast<Index>(t), k) = s.estimate(at);
      out.predicted_lower(static_cast<Index>(t), k) = s.lower(at);
      out.predicted_upper(static_cast<Index>(t), k) = s.upper(at);
    }
    out.fits.push_back(std::move(s));
  }

  const auto& top = ensemble.observed.orbits.back();
  out.baseline_contains_zero = top.ci_lower <= 0.0 && 0.0 <= top.ci_upper;
  for (Index k = 0; k < Q; ++k) {
    std::vector<double> lo(out.predicted_lower.col(k).begin(), out.predicted_lower.col(k).end());
    std::vector<double> hi(out.predicted_upper.col(k).begin(), out.predicted_upper.col(k).end());
    // Whiskers span the perturbed predictions only (row 0 is the observed fit).
    std::vector<double> eff(out.predicted_effects.col(k).begin() + (T > 1 ? 1 : 0), out.predicted_effects.col(k).end());
    Interval ui = uncertainty_interval(lo, hi, trim, alpha);
    out.uncertainty_intervals.push_back(ui);
    out.effect_spread.push_back({nearest_rank_percentile(eff, alpha / 2.0), nearest_rank_percentile(eff, 1.0 - alpha / 2.0)});
    if (!out.crossing_q && ui.contains(0.0) != out.baseline_contains_zero)
      out.crossing_q = out.q_values[static_cast<std::size_t>(k)];
  }
  return out;
}

}  // namespace confex
