#include "confex/data.hpp"
#include "confex/error.hpp"
#include "confex/estimator.hpp"
#include "confex/extrapolation.hpp"
#include "confex/glm.hpp"
#include "confex/simulation.hpp"
#include "confex/version.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <numeric>

namespace py = pybind11;
using namespace confex;

namespace {

OutcomeKind parse_kind(const std::string& s) {
  if (s == "binary") return OutcomeKind::binary;
  if (s == "continuous") return OutcomeKind::continuous;
  throw py::value_error("outcome_kind must be 'binary' or 'continuous'");
}

Family parse_family(const std::string& s) {
  if (s == "logit") return Family::bernoulli_logit;
  if (s == "probit") return Family::bernoulli_probit;
  if (s == "gaussian") return Family::gaussian_identity;
  throw py::value_error("family must be 'logit', 'probit' or 'gaussian'");
}

py::dict orbit_dict(const OrbitEstimate& o) {
  py::dict d;
  d["subset"] = o.subset;
  d["estimate"] = o.estimate;
  d["variance"] = o.variance;
  d["ci"] = py::make_tuple(o.ci_lower, o.ci_upper);
  if (o.influence.size() > 0) d["influence"] = o.influence;
  return d;
}

py::dict trajectory_dict(const Trajectory& t) {
  py::list orbits;
  for (const auto& o : t.orbits) orbits.append(orbit_dict(o));
  py::dict d;
  d["orbits"] = orbits;
  d["elimination_order"] = t.elimination_order;
  d["perturbed"] = t.perturbed;
  d["evaluations"] = t.evaluations;
  return d;
}

py::dict summary_dict(const MethodSummary& m) {
  py::dict d;
  d["mean"] = m.mean;
  d["sd"] = m.sd;
  d["bias"] = m.bias;
  d["rmse"] = m.rmse;
  d["coverage"] = m.coverage;
  return d;
}

}  // namespace

PYBIND11_MODULE(_confex, m) {
  m.doc() = "Covariate-elimination trajectories for doubly robust effect estimates";
  m.attr("__version__") = kVersion;

  static py::exception<Error> error_type(m, "ConfexError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error_type, e.what());
    }
  });

  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](Eigen::VectorXd a, Eigen::VectorXd y, const std::string& kind, std::vector<std::string> names,
                       Eigen::MatrixXd l) {
             return Dataset(std::move(a), std::move(y), parse_kind(kind), std::move(names), std::move(l));
           }),
           py::arg("exposure"), py::arg("outcome"), py::arg("outcome_kind"), py::arg("names"), py::arg("covariates"))
      .def_property_readonly("n", &Dataset::n)
      .def_property_readonly("covariate_names", &Dataset::covariate_names)
      .def_property_readonly("exposure", &Dataset::exposure)
      .def_property_readonly("outcome", &Dataset::outcome)
      .def_property_readonly("covariates", &Dataset::covariates);

  m.def(
      "load_csv",
      [](const std::string& path, const std::string& exposure, const std::string& outcome,
         const std::vector<std::string>& covariates, const std::string& kind, bool drop_incomplete) {
        std::vector<ColumnSpec> specs{{exposure, ColumnRole::exposure, std::nullopt},
                                      {outcome, ColumnRole::outcome, parse_kind(kind)}};
        for (const auto& c : covariates) specs.push_back({c, ColumnRole::covariate, std::nullopt});
        return load_csv(path, specs, drop_incomplete).data;
      },
      py::arg("path"), py::arg("exposure"), py::arg("outcome"), py::arg("covariates"),
      py::arg("outcome_kind") = "binary", py::arg("drop_incomplete") = false);

  m.def(
      "fit_glm",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::string& family,
         std::optional<Eigen::VectorXd> weights) {
        ModelFit f = weights ? fit_glm(x, y, parse_family(family), *weights) : fit_glm(x, y, parse_family(family));
        py::dict d;
        d["coefficients"] = f.coefficients;
        d["covariance"] = f.covariance;
        d["converged"] = f.converged;
        d["iterations"] = f.iterations;
        d["deviance"] = f.deviance;
        d["dispersion"] = f.dispersion;
        return d;
      },
      py::arg("design"), py::arg("response"), py::arg("family"), py::arg("weights") = py::none());

  m.def(
      "dr_effect",
      [](const Dataset& data, std::optional<std::vector<std::string>> subset, double alpha) {
        std::vector<std::string> s = subset ? *subset : data.covariate_names();
        return orbit_dict(dr_effect(data, s, std::nullopt, alpha));
      },
      py::arg("data"), py::arg("subset") = py::none(), py::arg("alpha") = 0.05);

  m.def(
      "build_trajectory",
      [](const Dataset& data, std::uint64_t seed, bool perturbed, double alpha) {
        EliminationOptions o;
        o.alpha = alpha;
        Trajectory t;
        {
          py::gil_scoped_release release;
          t = build_trajectory(data, perturbed ? TrajectoryMode::perturbed : TrajectoryMode::mle, seed, o);
        }
        return trajectory_dict(t);
      },
      py::arg("data"), py::arg("seed") = 0, py::arg("perturbed") = false, py::arg("alpha") = 0.05);

  m.def(
      "analyze",
      [](const Dataset& data, std::size_t B, std::uint64_t seed, std::optional<int> interior_knots,
         std::optional<std::vector<int>> q_values, double trim, double alpha) {
        const int J = static_cast<int>(data.num_covariates());
        TrajectoryEnsemble ens;
        ExtrapolationResult ex;
        {
          py::gil_scoped_release release;
          EnsembleOptions eo;
          eo.alpha = alpha;
          eo.retain_perturbed_influence = false;
          ens = build_ensemble(data, B, seed, eo);
          int K = 0;
          if (interior_knots) {
            K = *interior_knots;
          } else {
            std::vector<int> cand(static_cast<std::size_t>(max_interior_knots(J) + 1));
            std::iota(cand.begin(), cand.end(), 0);
            K = select_knots_cv(ens, cand);
          }
          ex = extrapolate_ensemble(ens, K, q_values ? *q_values : default_q_values(J), trim, alpha);
        }
        py::list ui;
        for (const auto& i : ex.uncertainty_intervals) ui.append(py::make_tuple(i.lower, i.upper));
        py::dict d;
        d["observed"] = trajectory_dict(ens.observed);
        d["interior_knots"] = ex.interior_knots;
        d["q_values"] = ex.q_values;
        d["predicted_effects"] = ex.predicted_effects;
        d["uncertainty_intervals"] = ui;
        d["crossing_q"] = ex.crossing_q ? py::object(py::int_(*ex.crossing_q)) : py::object(py::none());
        return d;
      },
      py::arg("data"), py::arg("B"), py::arg("seed"), py::arg("interior_knots") = py::none(),
      py::arg("q_values") = py::none(), py::arg("trim") = 0.05, py::arg("alpha") = 0.05);

  py::class_<SplineFit>(m, "SplineFit")
      .def_readonly("knots", &SplineFit::knots)
      .def_readonly("coefficients", &SplineFit::coefficients)
      .def("__call__", [](const SplineFit& s, double x) { return s(x); })
      .def("derivative", &SplineFit::derivative);

  m.def("natural_spline_basis", [](std::vector<double> x, std::vector<double> knots) {
    return natural_spline_basis(x, knots);
  });
  m.def(
      "fit_natural_spline",
      [](std::vector<double> x, std::vector<double> y, int K) { return fit_natural_spline(x, y, K); },
      py::arg("x"), py::arg("y"), py::arg("interior_knots"));
  m.def(
      "uncertainty_interval",
      [](std::vector<double> lowers, std::vector<double> uppers, double trim, double alpha) {
        Interval i = uncertainty_interval(lowers, uppers, trim, alpha);
        return py::make_tuple(i.lower, i.upper);
      },
      py::arg("lowers"), py::arg("uppers"), py::arg("trim") = 0.05, py::arg("alpha") = 0.05);

  m.def(
      "simulate",
      [](int study, int p, int q, double delta, const std::string& link, Index n, Index population, int replicates,
         int B, std::uint64_t seed) {
        Scenario s;
        if (study != 1 && study != 2) throw py::value_error("study must be 1 or 2");
        if (link != "logit" && link != "probit") throw py::value_error("link must be 'logit' or 'probit'");
        s.study = study == 1 ? Study::one : Study::two;
        s.p = p;
        s.q = q;
        s.delta = delta;
        s.exposure_link = link == "logit" ? ExposureLink::logit : ExposureLink::probit;
        s.sample_size = n;
        s.population_size = population;
        s.replicates = replicates;
        s.B = B;
        s.seed = seed;
        SimReport r;
        {
          py::gil_scoped_release release;
          r = run_study(s);
        }
        py::dict d;
        d["true_psi"] = r.true_psi;
        d["unmeasured"] = r.unmeasured_names;
        d["all"] = summary_dict(r.all);
        d["measured"] = summary_dict(r.measured);
        d["predicted"] = summary_dict(r.predicted);
        d["completed"] = r.completed;
        d["failures"] = r.failures;
        return d;
      },
      py::arg("study"), py::arg("p"), py::arg("q"), py::arg("delta"), py::arg("link") = "logit",
      py::arg("n") = 1000, py::arg("population") = 50000, py::arg("replicates") = 100, py::arg("B") = 100,
      py::arg("seed") = 1);
}
