#pragma once

// Independent reference computations. None of these call into the library's
// numerical code beyond data access and the effect estimate being checked.

#include "confex/estimator.hpp"
#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace oracle {

// Natural cubic spline basis written out from the truncated-power definition,
// one column per knot: 1, x, then d_k - d_{K'-1} for k = 1 .. K'-2.
inline std::vector<std::vector<double>> truncated_power_basis(const std::vector<double>& x,
                                                              const std::vector<double>& t) {
  const std::size_t kk = t.size();
  auto cube_plus = [](double v) { return v > 0 ? v * v * v : 0.0; };
  auto d = [&](std::size_t k, double v) {  // 0-based k
    return (cube_plus(v - t[k]) - cube_plus(v - t[kk - 1])) / (t[kk - 1] - t[k]);
  };
  std::vector<std::vector<double>> out;
  for (double v : x) {
    std::vector<double> row{1.0, v};
    for (std::size_t k = 0; k + 2 < kk; ++k) row.push_back(d(k, v) - d(kk - 2, v));
    out.push_back(row);
  }
  return out;
}

// m-th order statistic by full sort, rank = ceil(p * m) computed in integers
// where p = num / den.
inline double sorted_rank(std::vector<double> v, long num, long den) {
  std::sort(v.begin(), v.end());
  const long m = static_cast<long>(v.size());
  long rank = (num * m + den - 1) / den;
  rank = std::clamp(rank, 1L, m);
  return v[static_cast<std::size_t>(rank - 1)];
}

// Bootstrap variance of psi_j and of psi_j - psi_k.
struct BootstrapVariance {
  double var_j = 0.0;
  double var_diff = 0.0;
};

inline BootstrapVariance bootstrap(const confex::Dataset& d, const std::vector<std::string>& set_j,
                                   const std::vector<std::string>& set_k, int resamples, std::uint64_t seed) {
  confex::Rng rng(seed);
  std::uniform_int_distribution<confex::Index> pick(0, d.n() - 1);
  std::vector<double> ej, ed;
  std::vector<confex::Index> rows(static_cast<std::size_t>(d.n()));
  for (int b = 0; b < resamples; ++b) {
    for (auto& r : rows) r = pick(rng);
    const confex::Dataset s = d.select_rows(rows);
    const double pj = confex::dr_effect(s, set_j).estimate;
    const double pk = confex::dr_effect(s, set_k).estimate;
    ej.push_back(pj);
    ed.push_back(pj - pk);
  }
  auto var = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss / static_cast<double>(v.size() - 1);
  };
  return {var(ej), var(ed)};
}

// Single-misspecification data sets with a true effect of exactly 2.
// misspecify_exposure: the true propensity involves L1^2, which the fitted
// exposure model omits; the outcome is linear. Otherwise the propensity is
// linear in L1 and the outcome involves exp(L1).
inline confex::Dataset dr_scenario(int n, bool misspecify_exposure, std::uint64_t seed) {
  confex::Rng rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd l(n, 2);
  Eigen::VectorXd a(n), y(n);
  for (int i = 0; i < n; ++i) {
    const double l1 = z(rng), l2 = z(rng);
    l(i, 0) = l1;
    l(i, 1) = l2;
    const double ea = misspecify_exposure ? 0.5 * l1 + 0.4 * (l1 * l1 - 1.0) + 0.3 * l2 : 0.7 * l1 + 0.3 * l2;
    a(i) = unit(rng) < synth::expit(ea) ? 1.0 : 0.0;
    const double prog = misspecify_exposure ? 1.5 * l1 + l2 : std::exp(l1) + l2;
    y(i) = 1.0 + 2.0 * a(i) + prog + z(rng);
  }
  return confex::Dataset(a, y, confex::OutcomeKind::continuous, {"L1", "L2"}, l);
}

}  // namespace oracle
