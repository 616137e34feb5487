#include "confex/perturbation.hpp"
#include "synth.hpp"

#include <doctest.h>

using namespace confex;

namespace {

void check_same(const Trajectory& a, const Trajectory& b) {
  REQUIRE(a.orbits.size() == b.orbits.size());
  CHECK(a.elimination_order == b.elimination_order);
  CHECK(a.seed == b.seed);
  for (std::size_t j = 0; j < a.orbits.size(); ++j) {
    CHECK(a.orbits[j].estimate == b.orbits[j].estimate);
    CHECK(a.orbits[j].variance == b.orbits[j].variance);
    CHECK(a.orbits[j].subset == b.orbits[j].subset);
  }
}

}  // namespace

TEST_CASE("B below one is rejected") {
  Dataset d = synth::rct(200, 2, 0.1, 1);
  CHECK_THROWS_AS(build_ensemble(d, 0, 1), Error);
}

TEST_CASE("zero covariance collapses perturbed to observed") {
  Dataset d = synth::logistic_confounded(800, {0.5, -0.2, 0.3}, {0.4, 0.6, -0.3}, 0.3, 6);
  EnsembleOptions o;
  o.zero_covariance = true;
  auto e = build_ensemble(d, 1, 42, o);
  REQUIRE(e.perturbed.size() == 1);
  for (std::size_t j = 0; j < e.observed.orbits.size(); ++j)
    CHECK(e.perturbed[0].orbits[j].estimate == e.observed.orbits[j].estimate);
}

TEST_CASE("ensembles are deterministic and positional") {
  Dataset d = synth::logistic_confounded(600, {0.5, -0.2, 0.3, 0.1}, {0.4, 0.6, -0.3, 0.2}, 0.3, 7);
  auto a = build_ensemble(d, 6, 99);
  EnsembleOptions threaded;
  threaded.threads = 3;
  auto b = build_ensemble(d, 6, 99, threaded);
  check_same(a.observed, b.observed);
  for (std::size_t r = 0; r < 6; ++r) check_same(a.perturbed[r], b.perturbed[r]);

  // Replicate b run on its own, in reverse order, matches its ensemble slot.
  for (std::size_t r = 6; r-- > 0;) {
    auto solo = build_trajectory(d, TrajectoryMode::perturbed, replicate_seed(99, r + 1));
    check_same(solo, a.perturbed[r]);
  }
  check_same(build_trajectory(d, TrajectoryMode::mle, replicate_seed(99, 0)), a.observed);

  auto c = build_ensemble(d, 6, 100);
  bool differs = false;
  for (std::size_t r = 0; r < 6; ++r) differs |= c.perturbed[r].orbits.back().estimate != a.perturbed[r].orbits.back().estimate;
  CHECK(differs);
}

TEST_CASE("influence can be dropped from perturbed replicates") {
  Dataset d = synth::rct(300, 3, 0.1, 8);
  EnsembleOptions o;
  o.retain_perturbed_influence = false;
  auto e = build_ensemble(d, 2, 5, o);
  CHECK(e.observed.orbits[1].influence.size() == 300);
  CHECK(e.perturbed[0].orbits[1].influence.size() == 0);
}

TEST_CASE("perturbed top orbit centres on the observed estimate") {
  Dataset d = synth::rct(2000, 6, 0.1, 12);
  EnsembleOptions o;
  o.retain_perturbed_influence = false;
  auto e = build_ensemble(d, 200, 2024, o);
  double m = 0.0, ss = 0.0;
  for (const auto& t : e.perturbed) m += t.orbits.back().estimate;
  m /= 200.0;
  for (const auto& t : e.perturbed) ss += std::pow(t.orbits.back().estimate - m, 2);
  const double se = std::sqrt(ss / 199.0 / 200.0);
  CHECK(std::abs(m - e.observed.orbits.back().estimate) < 3.0 * se);
}
