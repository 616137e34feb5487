#include "confex/simulation.hpp"

#include "confex/elimination.hpp"
#include "confex/estimator.hpp"
#include "confex/parallel.hpp"

#include <cmath>
#include <numeric>

namespace confex {

namespace {

double expit(double x) { return glm::inverse_link(Family::bernoulli_logit, x); }

}  // namespace

void validate(const Scenario& s) {
  if (s.p < 1) throw Error(ErrorCode::InvalidArgument, "scenario needs p >= 1");
  if (s.q < 0) throw Error(ErrorCode::InvalidArgument, "scenario needs q >= 0");
  if (s.sample_size < 2 || s.population_size < s.sample_size)
    throw Error(ErrorCode::InvalidArgument, "scenario needs 2 <= n <= N");
  if (s.replicates < 1) throw Error(ErrorCode::InvalidArgument, "scenario needs at least one replicate");
  if (s.B < 1) throw Error(ErrorCode::InvalidArgument, "scenario needs B >= 1");
  if (!(s.alpha > 0.0 && s.alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  if (!(s.trim >= 0.0 && s.trim < 0.5)) throw Error(ErrorCode::InvalidArgument, "trim must lie in [0, 0.5)");
}

Population generate_population(const Scenario& s, Rng& rng) {
  validate(s);
  const int k = s.p + s.q;
  const Index N = s.population_size;
  const bool two = s.study == Study::two;

  std::uniform_real_distribution<double> alpha_law(two ? -0.25 : -1.0, two ? 0.25 : 1.0);
  std::uniform_real_distribution<double> beta_law(-4.0, 4.0);
  Eigen::VectorXd alpha(k), beta(k);
  for (int j = 0; j < k; ++j) alpha(j) = alpha_law(rng);
  for (int j = 0; j < k; ++j) beta(j) = two ? beta_law(rng) : alpha(j);
  if (s.zero_exposure_coefficients) alpha.setZero();

  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Family exposure_family =
      two && s.exposure_link == ExposureLink::probit ? Family::bernoulli_probit : Family::bernoulli_logit;
  const double outcome_sd = std::sqrt(static_cast<double>(k));

  Eigen::MatrixXd l(N, k);
  Eigen::VectorXd a(N), y(N);
  double effect_sum = 0.0;
  for (Index i = 0; i < N; ++i) {
    for (int j = 0; j < k; ++j) l(i, j) = normal(rng);
    const double lin_a = l.row(i).dot(alpha);
    const double lin_y = l.row(i).dot(beta);
    a(i) = unit(rng) < glm::inverse_link(exposure_family, lin_a) ? 1.0 : 0.0;
    if (two) {
      y(i) = s.delta * a(i) + lin_y + outcome_sd * normal(rng);
      effect_sum += (s.delta + lin_y) - lin_y;
    } else {
      y(i) = unit(rng) < expit(s.delta * a(i) + lin_y) ? 1.0 : 0.0;
      effect_sum += expit(s.delta + lin_y) - expit(lin_y);
    }
  }
  std::vector<std::string> names;
  for (int j = 1; j <= k; ++j) names.push_back("L" + std::to_string(j));
  Population pop{Dataset(std::move(a), std::move(y), two ? OutcomeKind::continuous : OutcomeKind::binary,
                         std::move(names), std::move(l)),
                 std::move(alpha), std::move(beta), effect_sum / static_cast<double>(N)};
  return pop;
}

std::vector<std::string> designate_unmeasured(const Dataset& population, int q, std::uint64_t seed) {
  if (q < 0 || q > population.num_covariates())
    throw Error(ErrorCode::InvalidArgument, "q must lie between 0 and the number of covariates");
  if (q == 0) return {};
  EliminationOptions options;
  options.max_eliminations = q;
  options.retain_influence = false;
  return build_trajectory(population, TrajectoryMode::mle, seed, options).elimination_order;
}

std::vector<Index> sample_without_replacement(Index N, Index n, Rng& rng) {
  if (n < 0 || n > N) throw Error(ErrorCode::InvalidArgument, "sample size exceeds population size");
  std::vector<Index> pool(static_cast<std::size_t>(N));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < n; ++i) {
    std::uniform_int_distribution<Index> pick(i, N - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(n));
  return pool;
}

MethodSummary summarize(std::span<const double> estimates, std::span<const double> lowers,
                        std::span<const double> uppers, double truth) {
  MethodSummary m;
  const auto R = static_cast<double>(estimates.size());
  if (estimates.empty()) return m;
  m.mean = std::accumulate(estimates.begin(), estimates.end(), 0.0) / R;
  double ss = 0.0;
  for (double e : estimates) ss += (e - m.mean) * (e - m.mean);
  m.sd = estimates.size() > 1 ? std::sqrt(ss / (R - 1.0)) : 0.0;
  m.bias = m.mean - truth;
  m.rmse = std::sqrt(m.bias * m.bias + m.sd * m.sd);
  std::size_t covered = 0;
  for (std::size_t r = 0; r < estimates.size(); ++r)
    if (lowers[r] <= truth && truth <= uppers[r]) ++covered;
  m.coverage = static_cast<double>(covered) / R;
  return m;
}

SimReport run_study(const Scenario& s, const StudyOptions& options) {
  validate(s);
  Rng population_rng = make_rng(derive_seed(s.seed, 1));
  const Population pop = generate_population(s, population_rng);

  SimReport report;
  report.true_psi = pop.true_psi;
  report.unmeasured_names = designate_unmeasured(pop.data, s.q, derive_seed(s.seed, 2));
  report.horizon = s.q > 0 ? s.q : 2;

  std::vector<Index> measured_columns;
  for (Index j = 0; j < pop.data.num_covariates(); ++j) {
    const auto& name = pop.data.covariate_names()[static_cast<std::size_t>(j)];
    if (std::find(report.unmeasured_names.begin(), report.unmeasured_names.end(), name) ==
        report.unmeasured_names.end())
      measured_columns.push_back(j);
  }
  const std::vector<std::string>& all_names = pop.data.covariate_names();
  const int K = max_interior_knots(s.p);
  const int horizon[] = {report.horizon};

  report.replicates.resize(static_cast<std::size_t>(s.replicates));
  parallel_for(static_cast<std::size_t>(s.replicates), options.threads, [&](std::size_t r) {
    ReplicateResult& out = report.replicates[r];
    try {
      Rng rng = make_rng(derive_seed(s.seed, 3, r));
      const auto rows = sample_without_replacement(s.population_size, s.sample_size, rng);
      const Dataset sample = pop.data.select_rows(rows);

      OrbitEstimate all = dr_effect(sample, all_names, std::nullopt, s.alpha);
      out.all_estimate = all.estimate;
      out.all_lower = all.ci_lower;
      out.all_upper = all.ci_upper;

      const Dataset measured = sample.select_covariates(measured_columns);
      EnsembleOptions eo;
      eo.alpha = s.alpha;
      eo.retain_perturbed_influence = false;
      const TrajectoryEnsemble ensemble =
          build_ensemble(measured, static_cast<std::size_t>(s.B), derive_seed(s.seed, 4, r), eo);
      const OrbitEstimate& top = ensemble.observed.orbits.back();
      out.measured_estimate = top.estimate;
      out.measured_lower = top.ci_lower;
      out.measured_upper = top.ci_upper;

      const ExtrapolationResult ex = extrapolate_ensemble(ensemble, K, horizon, s.trim, s.alpha);
      out.predicted_estimate = ex.predicted_effects(0, 0);
      out.predicted_lower = ex.uncertainty_intervals[0].lower;
      out.predicted_upper = ex.uncertainty_intervals[0].upper;
    } catch (const Error& e) {
      out.failed = true;
      out.failure = e.what();
    }
  });

  std::vector<double> est[3], lo[3], hi[3];
  for (const auto& r : report.replicates) {
    if (r.failed) {
      ++report.failures;
      continue;
    }
    ++report.completed;
    const double e[3] = {r.all_estimate, r.measured_estimate, r.predicted_estimate};
    const double l[3] = {r.all_lower, r.measured_lower, r.predicted_lower};
    const double h[3] = {r.all_upper, r.measured_upper, r.predicted_upper};
    for (int m = 0; m < 3; ++m) {
      est[m].push_back(e[m]);
      lo[m].push_back(l[m]);
      hi[m].push_back(h[m]);
    }
  }
  if (static_cast<double>(report.failures) > options.max_failure_fraction * s.replicates) {
    std::string first;
    for (const auto& r : report.replicates)
      if (r.failed) {
        first = r.failure;
        break;
      }
    throw Error(ErrorCode::StudyAborted, std::to_string(report.failures) + " of " + std::to_string(s.replicates) +
                                             " replicates failed (first: " + first + ")");
  }
  report.all = summarize(est[0], lo[0], hi[0], report.true_psi);
  report.measured = summarize(est[1], lo[1], hi[1], report.true_psi);
  report.predicted = summarize(est[2], lo[2], hi[2], report.true_psi);
  return report;
}

Table report_table(const Scenario& s, const SimReport& r) {
  Table t;
  t.columns = {"study",         "link",          "q",           "psi",           "p",
               "delta",         "n",             "B",           "horizon",       "mean_all",
               "sd_all",        "mean_measured", "sd_measured", "mean_predicted", "sd_predicted",
               "rmse_all",      "rmse_measured", "rmse_predicted", "coverage_all", "coverage_measured",
               "coverage_predicted", "replicates", "failures"};
  t.rows.push_back({s.study == Study::one ? 1.0 : 2.0,
                    s.exposure_link == ExposureLink::logit ? 0.0 : 1.0,
                    static_cast<double>(s.q),
                    r.true_psi,
                    static_cast<double>(s.p),
                    s.delta,
                    static_cast<double>(s.sample_size),
                    static_cast<double>(s.B),
                    static_cast<double>(r.horizon),
                    r.all.mean,
                    r.all.sd,
                    r.measured.mean,
                    r.measured.sd,
                    r.predicted.mean,
                    r.predicted.sd,
                    r.all.rmse,
                    r.measured.rmse,
                    r.predicted.rmse,
                    r.all.coverage,
                    r.measured.coverage,
                    r.predicted.coverage,
                    static_cast<double>(r.completed),
                    static_cast<double>(r.failures)});
  return t;
}

}  // namespace confex
