#include "confex/cli.hpp"

#include "confex/error.hpp"
#include "confex/extrapolation.hpp"
#include "confex/version.hpp"
#include "svg_plot.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

namespace confex::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Tracks the files a command has written so a failure can remove them.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}
  ~OutputSet() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& p : written_) fs::remove(p, ec);
    if (created_dir_) fs::remove(dir_, ec);  // only succeeds when empty
  }
  void prepare() {
    std::error_code ec;
    if (!fs::exists(dir_)) {
      fs::create_directories(dir_, ec);
      if (ec) throw Error(ErrorCode::IoFailure, "cannot create output directory " + dir_.string());
      created_dir_ = true;
    }
  }
  void write(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    written_.push_back(p);
    std::ofstream out(p, std::ios::binary);
    out << content;
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + p.string());
  }
  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
  bool created_dir_ = false;
  bool committed_ = false;
};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string render_orbits(const Trajectory& t) {
  std::ostringstream os;
  os << "orbit,estimate,variance,ci_lower,ci_upper,eliminated\n";
  const auto J = static_cast<int>(t.orbits.size()) - 1;
  for (int j = J; j >= 0; --j) {
    const auto& o = t.orbits[static_cast<std::size_t>(j)];
    // Orbit j is reached from orbit j + 1 by dropping elimination_order[J - j - 1].
    std::string dropped = j < J ? t.elimination_order[static_cast<std::size_t>(J - j - 1)] : std::string();
    os << j << ',' << format_number(o.estimate) << ',' << format_number(o.variance) << ','
       << format_number(o.ci_lower) << ',' << format_number(o.ci_upper) << ',' << csv_field(dropped) << '\n';
  }
  return os.str();
}

Table extrapolation_table(const ExtrapolationResult& r) {
  Table t;
  t.columns = {"q",        "x",        "observed_predicted", "effect_lower", "effect_upper",
               "ui_lower", "ui_upper", "ui_contains_zero",   "crossing_q"};
  const double crossing = r.crossing_q ? static_cast<double>(*r.crossing_q) : std::nan("");
  for (std::size_t k = 0; k < r.q_values.size(); ++k) {
    const auto& ui = r.uncertainty_intervals[k];
    t.rows.push_back({static_cast<double>(r.q_values[k]), static_cast<double>(r.J + r.q_values[k]),
                      r.predicted_effects(0, static_cast<Index>(k)), r.effect_spread[k].lower,
                      r.effect_spread[k].upper, ui.lower, ui.upper, ui.contains(0.0) ? 1.0 : 0.0, crossing});
  }
  return t;
}

json versions() {
  return {{"confex", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"compiler", __VERSION__}};
}

const char* knot_policy_name(KnotPolicy k) {
  switch (k) {
    case KnotPolicy::cv: return "cv";
    case KnotPolicy::max: return "max";
    case KnotPolicy::fixed: return "fixed";
  }
  return "?";
}

int exit_code_for(ErrorCode code) {
  if (code == ErrorCode::InvalidArgument) return kUsage;
  return is_data_error(code) ? kDataError : kNumericFailure;
}

std::vector<std::string> header_of(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  auto rows = parse_csv(line);
  if (rows.empty()) throw Error(ErrorCode::ParseError, "missing header row in " + path.string());
  std::vector<std::string> names;
  for (auto& n : rows.front()) {
    auto b = n.find_first_not_of(" \t\r");
    auto e = n.find_last_not_of(" \t\r");
    names.push_back(b == std::string::npos ? std::string() : n.substr(b, e - b + 1));
  }
  return names;
}

}  // namespace

int run_analyze(const AnalyzeConfig& c, std::ostream& err) {
  if (c.B < 1) {
    err << "analyze: B must be at least 1\n";
    return kUsage;
  }
  if (!(c.alpha > 0.0 && c.alpha < 1.0) || !(c.trim >= 0.0 && c.trim < 0.5) || c.q_max < 0) {
    err << "analyze: alpha must lie in (0, 1), trim in [0, 0.5) and q-max be non-negative\n";
    return kUsage;
  }
  if (c.exposure.empty() || c.outcome.empty() || c.out.empty()) {
    err << "analyze: --data, --exposure, --outcome and --out are required\n";
    return kUsage;
  }

  OutputSet outputs(c.out);
  std::string stage = "load";
  try {
    std::vector<ColumnSpec> specs{{c.exposure, ColumnRole::exposure, std::nullopt},
                                  {c.outcome, ColumnRole::outcome, c.outcome_kind}};
    std::vector<std::string> covariates = c.covariates;
    if (covariates.empty())
      for (const auto& name : header_of(c.data))
        if (name != c.exposure && name != c.outcome) covariates.push_back(name);
    for (const auto& name : covariates) specs.push_back({name, ColumnRole::covariate, std::nullopt});
    const LoadResult loaded = load_csv(c.data, specs, false);
    const Dataset& data = loaded.data;
    const int J = static_cast<int>(data.num_covariates());

    stage = "ensemble";
    EnsembleOptions eo;
    eo.alpha = c.alpha;
    eo.threads = c.threads;
    eo.retain_perturbed_influence = false;
    const TrajectoryEnsemble ensemble = build_ensemble(data, c.B, c.seed, eo);

    stage = "extrapolation";
    int K = 0;
    switch (c.knots) {
      case KnotPolicy::max: K = max_interior_knots(J); break;
      case KnotPolicy::fixed: K = c.fixed_knots; break;
      case KnotPolicy::cv: {
        std::vector<int> candidates(static_cast<std::size_t>(max_interior_knots(J) + 1));
        std::iota(candidates.begin(), candidates.end(), 0);
        K = select_knots_cv(ensemble, candidates);
        break;
      }
    }
    std::vector<int> q_values = default_q_values(J);
    if (c.q_max > 0) {
      q_values.resize(static_cast<std::size_t>(c.q_max));
      std::iota(q_values.begin(), q_values.end(), 1);
    }
    const ExtrapolationResult ex = extrapolate_ensemble(ensemble, K, q_values, c.trim, c.alpha);

    stage = "output";
    outputs.prepare();
    outputs.write("orbits.csv", render_orbits(ensemble.observed));
    outputs.write("extrapolation.csv", render_table(extrapolation_table(ex)));
    outputs.write("trajectory.svg",
                  render_trajectory_svg(ensemble, ex, "Effect of " + c.exposure + " on " + c.outcome));

    json manifest = {
        {"command", "analyze"},
        {"data", c.data.string()},
        {"exposure", c.exposure},
        {"outcome", c.outcome},
        {"outcome_kind", c.outcome_kind == OutcomeKind::binary ? "binary" : "continuous"},
        {"covariates", covariates},
        {"rows_read", loaded.rows_read},
        {"B", c.B},
        {"alpha", c.alpha},
        {"q_values", q_values},
        {"trim", c.trim},
        {"knot_policy", knot_policy_name(c.knots)},
        {"interior_knots", K},
        {"seed", c.seed},
        {"versions", versions()},
    };
    outputs.write("run.json", manifest.dump(2) + "\n");
    outputs.commit();
    return kSuccess;
  } catch (const Error& e) {
    err << "analyze failed during " << stage << ": " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "analyze failed during " << stage << ": " << e.what() << '\n';
    return kNumericFailure;
  }
}

int run_simulate(const SimulateConfig& c, std::ostream& err) {
  const Scenario& s = c.scenario;
  try {
    validate(s);
  } catch (const Error& e) {
    err << "simulate: " << e.what() << '\n';
    return kUsage;
  }
  if (c.out.empty()) {
    err << "simulate: --out is required\n";
    return kUsage;
  }
  OutputSet outputs(c.out);
  try {
    StudyOptions so;
    so.threads = c.threads;
    const SimReport report = run_study(s, so);
    outputs.prepare();
    outputs.write("report.csv", render_table(report_table(s, report)));
    json manifest = {
        {"command", "simulate"},
        {"study", s.study == Study::one ? 1 : 2},
        {"link", s.exposure_link == ExposureLink::logit ? "logit" : "probit"},
        {"p", s.p},
        {"q", s.q},
        {"delta", s.delta},
        {"n", s.sample_size},
        {"population", s.population_size},
        {"replicates", s.replicates},
        {"B", s.B},
        {"alpha", s.alpha},
        {"seed", s.seed},
        {"unmeasured", report.unmeasured_names},
        {"true_psi", report.true_psi},
        {"versions", versions()},
    };
    outputs.write("run.json", manifest.dump(2) + "\n");
    outputs.commit();
    return kSuccess;
  } catch (const Error& e) {
    err << "simulate failed: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "simulate failed: " << e.what() << '\n';
    return kNumericFailure;
  }
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Confounder-elimination trajectories and extrapolated sensitivity analysis"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "TOML or INI file; explicit flags take precedence");
  app.require_subcommand(1);

  AnalyzeConfig ac;
  std::string outcome_kind = "binary";
  std::string covariates = "all-others";
  std::string knots = "cv";
  std::string data_path, out_path;
  auto* analyze = app.add_subcommand("analyze", "Analyze a CSV data set");
  analyze->add_option("--data", data_path, "Input CSV")->required();
  analyze->add_option("--exposure", ac.exposure, "Binary exposure column")->required();
  analyze->add_option("--outcome", ac.outcome, "Outcome column")->required();
  analyze->add_option("--outcome-kind", outcome_kind)->check(CLI::IsMember({"binary", "continuous"}));
  analyze->add_option("--covariates", covariates, "Comma-separated list, or all-others");
  analyze->add_option("--b", ac.B, "Perturbed trajectories")->default_val(500);
  analyze->add_option("--alpha", ac.alpha)->default_val(0.05);
  analyze->add_option("--q-max", ac.q_max, "Largest extrapolation horizon (0: half the covariates)");
  analyze->add_option("--trim", ac.trim)->default_val(0.05);
  analyze->add_option("--knots", knots, "cv, max or an interior knot count");
  analyze->add_option("--seed", ac.seed)->required();
  analyze->add_option("--out", out_path, "Output directory")->required();
  analyze->add_option("--threads", ac.threads)->default_val(1);

  SimulateConfig sc;
  std::string study = "1", link = "logit";
  auto* simulate = app.add_subcommand("simulate", "Run a simulation study scenario");
  simulate->add_option("--study", study)->required();
  simulate->add_option("--p", sc.scenario.p)->required();
  simulate->add_option("--q", sc.scenario.q)->default_val(0);
  simulate->add_option("--delta", sc.scenario.delta)->default_val(0.0);
  simulate->add_option("--link", link);
  simulate->add_option("--n", sc.scenario.sample_size)->default_val(1000);
  simulate->add_option("--population", sc.scenario.population_size)->default_val(50000);
  simulate->add_option("--replicates", sc.scenario.replicates)->default_val(1000);
  simulate->add_option("--b", sc.scenario.B)->default_val(100);
  simulate->add_option("--alpha", sc.scenario.alpha)->default_val(0.05);
  simulate->add_option("--seed", sc.scenario.seed)->required();
  simulate->add_option("--out", out_path, "Output directory")->required();
  simulate->add_option("--threads", sc.threads)->default_val(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kUsage;
  }

  if (analyze->parsed()) {
    ac.data = data_path;
    ac.out = out_path;
    ac.outcome_kind = outcome_kind == "continuous" ? OutcomeKind::continuous : OutcomeKind::binary;
    if (covariates != "all-others") {
      std::stringstream ss(covariates);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) ac.covariates.push_back(item);
      if (ac.covariates.empty()) {
        std::cerr << "analyze: --covariates is empty\n";
        return kUsage;
      }
    }
    if (knots == "cv") {
      ac.knots = KnotPolicy::cv;
    } else if (knots == "max") {
      ac.knots = KnotPolicy::max;
    } else {
      try {
        std::size_t used = 0;
        ac.fixed_knots = std::stoi(knots, &used);
        if (used != knots.size() || ac.fixed_knots < 0) throw std::invalid_argument(knots);
        ac.knots = KnotPolicy::fixed;
      } catch (const std::exception&) {
        std::cerr << "analyze: --knots must be cv, max or a non-negative integer\n";
        return kUsage;
      }
    }
    return run_analyze(ac, std::cerr);
  }

  sc.out = out_path;
  if (study == "1") {
    sc.scenario.study = Study::one;
  } else if (study == "2") {
    sc.scenario.study = Study::two;
  } else {
    std::cerr << "simulate: unknown study '" << study << "' (expected 1 or 2)\n";
    return kUsage;
  }
  if (link == "logit") {
    sc.scenario.exposure_link = ExposureLink::logit;
  } else if (link == "probit") {
    sc.scenario.exposure_link = ExposureLink::probit;
  } else {
    std::cerr << "simulate: unknown link '" << link << "'\n";
    return kUsage;
  }
  return run_simulate(sc, std::cerr);
}

}  // namespace confex::cli
