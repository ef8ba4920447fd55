#include "polband/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "polband/bands.hpp"
#include "polband/estimators.hpp"
#include "polband/io.hpp"
#include "polband/parallel.hpp"
#include "polband/rng.hpp"
#include "polband/simulate.hpp"

namespace polband {

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

struct CommonOptions {
  double alpha = 0.05;
  double beta = 0.01;
  int B = 1000;
  int t_grid = 50;
  std::uint64_t seed = 0;
  int folds = 2;
  std::string methods;
  std::string out;
  bool verbose = false;
  std::string bandwidth = "silverman";
  std::string propensity = "kernel";
  double clip = 0.01;
  int optimizer_budget = 2000;
  int grid = 2000;
  std::string config;
};

struct StudyOptions {
  CommonOptions common;
  std::string scenario = "non-unique";
  std::size_t n = 500;
  int reps = 1000;
  double noise_sd = 0.5;
  double noise_corr = 0.5;
  bool band_cross_fit = false;
  bool one_step_in_sample = false;
  int integration_points = 0;
};

struct AnalyzeOptions {
  CommonOptions common;
  std::string input;
  std::string policy_class = "threshold";
  bool one_step_in_sample = false;
};

struct CurveOptions {
  std::string scenario = "non-unique";
  int resolution = 201;
  int integration_points = 0;
  double noise_sd = 0.5;
  double noise_corr = 0.5;
  std::string out;
  std::string cate_out;
  std::vector<std::uint64_t> emit_sample;
  std::string sample_out = "sample.csv";
};

std::vector<Method> parse_methods(const std::string& text) {
  std::vector<Method> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    Method m;
    try {
      m = parse_method(item);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    if (std::find(out.begin(), out.end(), m) != out.end()) {
      throw UsageError("method '" + item + "' listed twice");
    }
    out.push_back(m);
  }
  return out;
}

Bandwidth parse_bandwidth(const std::string& text) {
  if (text == "silverman" || text == "auto") return Bandwidth::silverman();
  double h = 0.0;
  try {
    std::size_t used = 0;
    h = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw UsageError("--bandwidth must be 'silverman' or a positive number");
  }
  if (!(h > 0.0)) throw UsageError("--bandwidth must be positive");
  return Bandwidth::fixed(h);
}

// "kernel", "known" (the scenario's true propensity), or a constant in (0,1).
PropensityMethod parse_propensity(const std::string& text, bool allow_known) {
  if (text == "kernel") return PropensityMethod::kernel();
  if (text == "known") {
    if (!allow_known) throw UsageError("--propensity known needs a simulated scenario");
    return PropensityMethod::known(nullptr);
  }
  double p = 0.0;
  try {
    std::size_t used = 0;
    p = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw UsageError("--propensity must be 'kernel', 'known', or a constant in (0,1)");
  }
  if (!(p > 0.0 && p < 1.0)) throw UsageError("--propensity constant must lie in (0,1)");
  return PropensityMethod::known([p](std::span<const double>) { return p; });
}

NuisanceRecipe make_recipe(const CommonOptions& o, bool allow_known) {
  if (!(o.clip > 0.0 && o.clip < 0.5)) throw UsageError("--clip must lie in (0, 0.5)");
  return {parse_bandwidth(o.bandwidth), parse_propensity(o.propensity, allow_known), o.clip};
}

void validate_common(const CommonOptions& o, bool need_bands) {
  if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
  if (need_bands) {
    if (!(o.beta > 0.0 && o.beta < o.alpha)) throw UsageError("--beta must satisfy 0 < beta < alpha");
    if (o.B < 100) throw UsageError("--B must be at least 100");
    if (o.t_grid < 2) throw UsageError("--t-grid must be at least 2");
  }
  if (o.folds < 2) throw UsageError("--folds must be at least 2");
  if (o.grid < 2) throw UsageError("--grid must be at least 2");
}

bool uses_bands(std::span<const Method> methods) {
  return methods.empty() || std::any_of(methods.begin(), methods.end(), [](Method m) {
           return m == Method::union_bound || m == Method::joint;
         });
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw Error("failed writing '" + path + "'");
}

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--alpha", o.alpha, "Miscoverage level")->capture_default_str();
  cmd->add_option("--beta", o.beta, "First-stage error budget (0 < beta < alpha)")
      ->capture_default_str();
  cmd->add_option("--B", o.B, "Bootstrap replicates")->capture_default_str();
  cmd->add_option("--t-grid", o.t_grid, "Candidate cutoffs for the joint method")
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "Master seed")->capture_default_str();
  cmd->add_option("--folds", o.folds, "Cross-fitting folds for the one-step estimator")
      ->capture_default_str();
  cmd->add_option("--methods", o.methods, "Comma-separated: union,joint,one-step,os-split,oracle");
  cmd->add_option("--out", o.out, "Output path");
  cmd->add_flag("--verbose", o.verbose, "Full per-replicate / per-policy detail");
  cmd->add_option("--bandwidth", o.bandwidth, "'silverman' or a fixed kernel bandwidth")
      ->capture_default_str();
  cmd->add_option("--propensity", o.propensity, "'kernel', 'known', or a constant")
      ->capture_default_str();
  cmd->add_option("--clip", o.clip, "Propensity clipping level")->capture_default_str();
  cmd->add_option("--optimizer-budget", o.optimizer_budget, "Box-class objective evaluations")
      ->capture_default_str();
  cmd->add_option("--grid", o.grid, "Thresholds (1D) or approximate number of boxes (3D)")
      ->capture_default_str();
  cmd->add_option("--config", o.config, "JSON file of option values; flags take precedence");
}

// Flattens nested objects into dotted keys: {"band": {"B": 500}} -> "band.B".
void flatten(const nlohmann::json& j, const std::string& prefix,
             std::map<std::string, nlohmann::json>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      flatten(*it, key, out);
    } else {
      out[key] = *it;
    }
  }
}

template <class T>
T config_value(const std::string& key, const nlohmann::json& v) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw UsageError("config key '" + key + "' has the wrong type");
  }
}

std::string number_or_string(const std::string& key, const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return format_double(v.get<double>());
  throw UsageError("config key '" + key + "' must be a number or a string");
}

// Applies a JSON config to a subcommand. Values only fill options that were
// not given on the command line. `in_sample` is the one-step nuisance mode.
void apply_config(CLI::App* cmd, CommonOptions& o, bool& in_sample,
                  const std::function<bool(const std::string&, const nlohmann::json&)>& extra) {
  if (o.config.empty()) return;
  std::ifstream f(o.config);
  if (!f) throw UsageError("cannot open config file '" + o.config + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config file '" + o.config + "': " + e.what());
  }
  if (!j.is_object()) throw UsageError("config file must hold a JSON object");
  std::map<std::string, nlohmann::json> kv;
  flatten(j, "", kv);

  auto unset = [&](const char* flag) { return cmd->get_option(flag)->count() == 0; };
  std::optional<double> alpha;
  for (const auto& [key, v] : kv) {
    if (key == "alpha" || key == "band.alpha") {
      double a = config_value<double>(key, v);
      if (alpha && *alpha != a) throw UsageError("config sets alpha and band.alpha differently");
      alpha = a;
      if (unset("--alpha")) o.alpha = a;
    } else if (key == "band.beta") {
      if (unset("--beta")) o.beta = config_value<double>(key, v);
    } else if (key == "band.B") {
      if (unset("--B")) o.B = config_value<int>(key, v);
    } else if (key == "band.t_grid") {
      if (unset("--t-grid")) o.t_grid = config_value<int>(key, v);
    } else if (key == "band.seed" || key == "seed") {
      if (unset("--seed")) o.seed = config_value<std::uint64_t>(key, v);
    } else if (key == "nuisance.bandwidth") {
      if (unset("--bandwidth")) o.bandwidth = number_or_string(key, v);
    } else if (key == "nuisance.propensity") {
      if (unset("--propensity")) o.propensity = number_or_string(key, v);
    } else if (key == "nuisance.clip") {
      if (unset("--clip")) o.clip = config_value<double>(key, v);
    } else if (key == "nuisance.folds") {
      if (unset("--folds")) o.folds = config_value<int>(key, v);
    } else if (key == "estimator.cross_fit") {
      if (cmd->get_option("--one-step-in-sample")->count() == 0) {
        in_sample = !config_value<bool>(key, v);
      }
    } else if (key == "methods") {
      if (unset("--methods")) o.methods = config_value<std::string>(key, v);
    } else if (key == "grid") {
      if (unset("--grid")) o.grid = config_value<int>(key, v);
    } else if (key == "optimizer_budget") {
      if (unset("--optimizer-budget")) o.optimizer_budget = config_value<int>(key, v);
    } else if (!extra(key, v)) {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
}

int cmd_study(const StudyOptions& o, std::ostream& out) {
  const auto names = scenario_names();
  if (std::find(names.begin(), names.end(), o.scenario) == names.end()) {
    throw UsageError("unknown scenario '" + o.scenario + "'");
  }
  StudyConfig c;
  c.scenario = o.scenario;
  c.scenario_options = {o.noise_sd, o.noise_corr};
  c.n = o.n;
  c.grid = o.common.grid;
  c.B = o.common.B;
  c.replications = o.reps;
  c.alpha = o.common.alpha;
  c.beta = o.common.beta;
  c.t_grid = o.common.t_grid;
  c.methods = parse_methods(o.common.methods);
  c.seed = o.common.seed;
  c.nuisance = make_recipe(o.common, true);
  c.band_cross_fit = o.band_cross_fit;
  c.one_step.folds = o.common.folds;
  c.one_step.cross_fit = !o.one_step_in_sample;
  c.optimizer_budget = o.common.optimizer_budget;
  c.integration_points = o.integration_points;
  c.keep_intervals = o.common.verbose;

  validate_common(o.common, uses_bands(c.methods));
  if (o.n < 4) throw UsageError("--n must be at least 4");
  if (o.reps < 1) throw UsageError("--reps must be at least 1");
  if (!(o.noise_sd > 0.0)) throw UsageError("--noise-sd must be positive");
  if (!(o.noise_corr >= -1.0 && o.noise_corr <= 1.0)) {
    throw UsageError("--noise-corr must lie in [-1, 1]");
  }

  const CoverageReport report = run_study(c);
  out << report_table(report);
  const std::string csv = report_csv(report);
  if (o.common.out.empty()) {
    out << '\n' << csv;
    if (o.common.verbose) out << '\n' << report_json(report).dump(2) << '\n';
  } else {
    write_text(o.common.out, csv);
    if (o.common.verbose) {
      std::filesystem::path p(o.common.out);
      p.replace_extension(".json");
      write_text(p.string(), report_json(report).dump(2) + "\n");
    }
  }
  return 0;
}

nlohmann::json interval_json(const Interval& iv) {
  return {{"lower", iv.lower}, {"upper", iv.upper}, {"width", iv.width()}};
}

int cmd_analyze(const AnalyzeOptions& o, std::ostream& out) {
  std::vector<Method> methods = parse_methods(o.common.methods);
  if (methods.empty()) {
    methods = {Method::union_bound, Method::joint, Method::one_step, Method::os_split};
  }
  if (std::find(methods.begin(), methods.end(), Method::oracle) != methods.end()) {
    throw UsageError("the oracle method needs a simulated scenario; not available in analyze");
  }
  validate_common(o.common, uses_bands(methods));
  const NuisanceRecipe recipe = make_recipe(o.common, false);
  if (o.input.empty()) throw UsageError("--input is required");
  if (!std::filesystem::exists(o.input)) throw UsageError("input file '" + o.input + "' not found");

  const Dataset data = read_dataset_csv_file(o.input);
  const bool box = o.policy_class == "box";
  if (box && data.dim() < 3) throw UsageError("--class box needs at least 3 features");

  nlohmann::json j;
  j["n"] = data.size();
  j["dim"] = data.dim();
  j["class"] = o.policy_class;
  j["alpha"] = o.common.alpha;
  j["seed"] = o.common.seed;

  const NuisanceFit fit = fit_nuisance(data, recipe);
  {
    const NuisanceTable& t = fit.table();
    const auto [lo, hi] = std::minmax_element(t.p1.begin(), t.p1.end());
    const std::size_t clipped = std::count_if(t.p1.begin(), t.p1.end(), [&](double p) {
      return p <= recipe.clip || p >= 1.0 - recipe.clip;
    });
    j["nuisance"] = {
        {"arm_counts", {data.count_action(0), data.count_action(1)}},
        {"bandwidth",
         {{"control", fit.model(0).arm(0).bandwidth()},
          {"treated", fit.model(0).arm(1).bandwidth()}}},
        {"propensity", {{"min", *lo}, {"max", *hi}, {"clipped", clipped}}}};
  }

  nlohmann::json intervals = nlohmann::json::object();
  if (uses_bands(methods)) {
    PolicyGrid grid = [&] {
      if (!box) return grid_threshold(-1.0, 1.0, o.common.grid);
      int per_axis = static_cast<int>(std::lround(std::cbrt(static_cast<double>(o.common.grid))));
      if (per_axis % 2 == 0) ++per_axis;
      return grid_box(-1.0, 1.0, std::max(per_axis, 2));
    }();
    if (box && o.common.optimizer_budget > 0) {
      auto objective = [&](const Policy& p) {
        return value_estimate(p, fit, data, Outcome::primary).estimate;
      };
      Policy best = optimize_over_class(objective, ClassKind::box, {},
                                        o.common.optimizer_budget, o.common.seed);
      const auto ps = grid.policies();
      if (std::find(ps.begin(), ps.end(), best) == ps.end()) {
        grid = grid.with_appended(best, "optimizer refinement");
      }
    }
    const PolicyEstimates est = estimate_all(grid, fit, data);
    const BandResult r = compute_bands(
        est, BandConfig{o.common.B, o.common.alpha, o.common.beta, o.common.t_grid,
                        derive_seed(o.common.seed, 0, static_cast<std::uint64_t>(
                                                          StreamRole::bootstrap))});
    nlohmann::json bands = to_json(r);
    for (const char* key : {"union", "joint"}) {
      bands[key]["kept_size"] = bands[key]["kept"].size();
      if (!o.common.verbose) bands[key].erase("kept");
    }
    j["B"] = o.common.B;
    j["beta"] = o.common.beta;
    j["bands"] = bands;
    if (o.common.verbose) j["grid"] = grid_to_json(grid);
    for (Method m : methods) {
      if (m == Method::union_bound) intervals["union"] = interval_json(r.union_interval);
      if (m == Method::joint) intervals["joint"] = interval_json(r.joint_interval);
    }
  }
  for (Method m : methods) {
    if (m != Method::one_step && m != Method::os_split) continue;
    const OneStepResult os =
        m == Method::one_step
            ? one_step_ci(data, o.common.alpha, recipe,
                          OneStepOptions{!o.one_step_in_sample, o.common.folds},
                          derive_seed(o.common.seed, 0,
                                      static_cast<std::uint64_t>(StreamRole::folds)))
            : os_split_ci(data, o.common.alpha, recipe,
                          derive_seed(o.common.seed, 0,
                                      static_cast<std::uint64_t>(StreamRole::split)));
    nlohmann::json e = interval_json(os.interval);
    e["estimate"] = os.psi_os;
    e["sd"] = os.sigma_n;
    e["degenerate"] = os.degenerate;
    intervals[std::string(method_name(m))] = e;
  }
  j["intervals"] = intervals;

  const std::string text = j.dump(2) + "\n";
  if (o.common.out.empty()) {
    out << text;
  } else {
    write_text(o.common.out, text);
  }
  return 0;
}

int cmd_curves(const CurveOptions& o, std::ostream& out) {
  if (o.resolution < 2) throw UsageError("--resolution must be at least 2");
  const ScenarioSpec spec = make_scenario(o.scenario, {o.noise_sd, o.noise_corr});
  const int points =
      o.integration_points > 0 ? o.integration_points : default_integration_points(spec.dim);

  std::ostringstream values;
  values << "a,omega,psi\n";
  for (const ValueCurvePoint& p : value_curve(spec, o.resolution, points)) {
    values << format_double(p.a) << ',' << format_double(p.omega) << ','
           << format_double(p.psi) << '\n';
  }
  if (o.out.empty()) {
    out << values.str();
  } else {
    write_text(o.out, values.str());
  }
  if (!o.cate_out.empty()) {
    std::ostringstream cate;
    cate << "x,q,s\n";
    for (const CateCurvePoint& p : cate_curve(spec, o.resolution)) {
      cate << format_double(p.x) << ',' << format_double(p.q) << ',' << format_double(p.s)
           << '\n';
    }
    write_text(o.cate_out, cate.str());
  }
  if (!o.emit_sample.empty()) {
    if (o.emit_sample[0] < 1) throw UsageError("--emit-sample needs n >= 1");
    const Dataset d = generate(spec, o.emit_sample[0], o.emit_sample[1]);
    std::ostringstream s;
    write_dataset_csv(s, d);
    write_text(o.sample_out, s.str());
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Confidence intervals for the subsidiary value of optimal policies"};
  app.name("polband");
  app.require_subcommand(1);

  std::vector<std::string> scenarios;
  for (auto n : scenario_names()) scenarios.emplace_back(n);

  StudyOptions study;
  CLI::App* s = app.add_subcommand("study", "Monte Carlo coverage study");
  s->add_option("--scenario", study.scenario, "Scenario name")
      ->check(CLI::IsMember(scenarios))
      ->capture_default_str();
  s->add_option("--n", study.n, "Sample size per replicate")->capture_default_str();
  s->add_option("--reps", study.reps, "Monte Carlo replications")->capture_default_str();
  s->add_option("--noise-sd", study.noise_sd, "Noise SD")->capture_default_str();
  s->add_option("--noise-corr", study.noise_corr, "Correlation of the two noises")
      ->capture_default_str();
  s->add_flag("--band-cross-fit", study.band_cross_fit, "Cross-fit nuisances for the bands");
  s->add_flag("--one-step-in-sample", study.one_step_in_sample,
              "Fit the one-step nuisances and plug-in policy on the full sample");
  s->add_option("--integration-points", study.integration_points,
                "Quadrature points for the truth (0: default)");
  add_common(s, study.common);

  AnalyzeOptions analyze;
  CLI::App* a = app.add_subcommand("analyze", "Intervals for a dataset CSV");
  a->add_option("--input", analyze.input, "Dataset CSV (x1..xd,a,y_star,y_dag)");
  a->add_option("--class", analyze.policy_class, "Policy class")
      ->check(CLI::IsMember({"threshold", "box"}))
      ->capture_default_str();
  a->add_flag("--one-step-in-sample", analyze.one_step_in_sample,
              "Fit the one-step nuisances and plug-in policy on the full sample");
  add_common(a, analyze.common);

  CurveOptions curves;
  CLI::App* c = app.add_subcommand("scenario-curves", "True value and CATE curves");
  c->add_option("--scenario", curves.scenario, "Scenario name")
      ->check(CLI::IsMember(scenarios))
      ->capture_default_str();
  c->add_option("--resolution", curves.resolution, "Points per curve")->capture_default_str();
  c->add_option("--integration-points", curves.integration_points, "Quadrature points");
  c->add_option("--noise-sd", curves.noise_sd, "Noise SD (emitted sample)");
  c->add_option("--noise-corr", curves.noise_corr, "Noise correlation (emitted sample)");
  c->add_option("--out", curves.out, "Value-curve CSV (default: stdout)");
  c->add_option("--cate-out", curves.cate_out, "CATE-curve CSV");
  c->add_option("--emit-sample", curves.emit_sample, "Write a sample: N SEED")->expected(2);
  c->add_option("--sample-out", curves.sample_out, "Sample CSV path")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands()[0]->help());
      return 0;
    }
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    configure_threads_from_env();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (s->parsed()) {
      apply_config(s, study.common, study.one_step_in_sample,
                   [&](const std::string& key, const nlohmann::json& v) {
                     auto unset = [&](const char* flag) { return s->get_option(flag)->count() == 0; };
                     if (key == "scenario") {
                       if (unset("--scenario")) study.scenario = config_value<std::string>(key, v);
                     } else if (key == "n") {
                       if (unset("--n")) study.n = config_value<std::size_t>(key, v);
                     } else if (key == "reps") {
                       if (unset("--reps")) study.reps = config_value<int>(key, v);
                     } else if (key == "noise_sd") {
                       if (unset("--noise-sd")) study.noise_sd = config_value<double>(key, v);
                     } else if (key == "noise_corr") {
                       if (unset("--noise-corr")) study.noise_corr = config_value<double>(key, v);
                     } else {
                       return false;
                     }
                     return true;
                   });
      return cmd_study(study, out);
    }
    if (a->parsed()) {
      apply_config(a, analyze.common, analyze.one_step_in_sample,
                   [](const std::string&, const nlohmann::json&) { return false; });
      return cmd_analyze(analyze, out);
    }
    if (a->parsed()) return cmd_analyze(analyze, out);
    return cmd_curves(curves, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace polband
