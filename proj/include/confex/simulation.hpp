#pragma once

#include "confex/data.hpp"
#include "confex/extrapolation.hpp"
#include "confex/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace confex {

enum class Study { one, two };
enum class ExposureLink { logit, probit };

struct Scenario {
  Study study = Study::one;
  int p = 12;            // measured confounders
  int q = 0;             // unmeasured confounders
  double delta = 0.0;    // conditional exposure coefficient
  ExposureLink exposure_link = ExposureLink::logit;  // study two only
  Index population_size = 50000;
  Index sample_size = 1000;
  int replicates = 1000;
  int B = 100;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  double trim = 0.0;
  // Test hook: all exposure-model coefficients set to zero.
  bool zero_exposure_coefficients = false;
};

// Throws InvalidArgument unless p >= 1, q >= 0, N >= n, replicates >= 1, B >= 1.
void validate(const Scenario& scenario);

struct Population {
  Dataset data;  // covariates named L1 .. L{p+q}
  Eigen::VectorXd exposure_coefficients;  // alpha_1..alpha_{p+q} (intercept 0)
  Eigen::VectorXd outcome_coefficients;   // beta_1..beta_{p+q} (intercept 0)
  double true_psi = 0.0;                  // population mean of E(Y^1 - Y^0 | L)
};

Population generate_population(const Scenario& scenario, Rng& rng);

// First q covariates removed by MLE-mode elimination on the population.
std::vector<std::string> designate_unmeasured(const Dataset& population, int q, std::uint64_t seed = 0);

// n distinct indices from [0, N) (partial Fisher-Yates).
std::vector<Index> sample_without_replacement(Index N, Index n, Rng& rng);

struct ReplicateResult {
  bool failed = false;
  std::string failure;
  double all_estimate = 0.0, all_lower = 0.0, all_upper = 0.0;
  double measured_estimate = 0.0, measured_lower = 0.0, measured_upper = 0.0;
  double predicted_estimate = 0.0, predicted_lower = 0.0, predicted_upper = 0.0;
};

struct MethodSummary {
  double mean = 0.0;
  double sd = 0.0;      // empirical SD (denominator R - 1)
  double bias = 0.0;    // mean - true_psi
  double rmse = 0.0;    // sqrt(bias^2 + sd^2)
  double coverage = 0.0;
};

struct SimReport {
  MethodSummary all, measured, predicted;
  double true_psi = 0.0;
  std::vector<std::string> unmeasured_names;
  int horizon = 0;  // extrapolation horizon used for "Predicted"
  int completed = 0;
  int failures = 0;
  std::vector<ReplicateResult> replicates;
};

struct StudyOptions {
  unsigned threads = 1;  // 0 = all hardware threads
  double max_failure_fraction = 0.05;
};

// Throws StudyAborted when more than max_failure_fraction of replicates fail.
SimReport run_study(const Scenario& scenario, const StudyOptions& options = {});

MethodSummary summarize(std::span<const double> estimates, std::span<const double> lowers,
                        std::span<const double> uppers, double truth);

// One-row report: scenario columns, then mean, sd, rmse and coverage per method.
Table report_table(const Scenario& scenario, const SimReport& report);

}  // namespace confex
