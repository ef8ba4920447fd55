#pragma once

// Simulation scenarios, quadrature ground truth, the oracle interval, the
// margin-condition check, and the Monte Carlo coverage driver.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "polband/bands.hpp"
#include "polband/estimators.hpp"
#include "polband/model.hpp"
#include "polband/nuisance.hpp"

namespace polband {

using ScalarField = std::function<double(std::span<const double>)>;

struct ScenarioOptions {
  double noise_sd = 0.5;
  double noise_corr = 0.5;
};

/// Data-generating process: X ~ Uniform[-1,1]^dim, A | X ~ Bernoulli(p(X)),
/// Y* = b*(X) + A q(X) + e*, Y† = b†(X) + A s(X) + e†, with (e*, e†)
/// bivariate normal (common SD, correlation noise_corr).
struct ScenarioSpec {
  std::string name;
  int dim = 1;
  ScalarField q_true;
  ScalarField s_true;
  ScalarField baseline_primary;
  ScalarField baseline_subsidiary;
  ScalarField propensity_true;
  double noise_sd = 0.5;
  double noise_corr = 0.5;
};

std::span<const std::string_view> scenario_names();

/// Shipped scenarios: non-unique, unique-margin, unique-non-margin,
/// 3d-margin, 3d-non-margin. Defining sign properties of q are checked
/// numerically before returning.
ScenarioSpec make_scenario(std::string_view name, ScenarioOptions options = {});

Dataset generate(const ScenarioSpec& spec, std::size_t n, std::uint64_t seed);

/// Default quadrature budget (tensor midpoint points per policy region).
int default_integration_points(int dim);

/// True value of a threshold or box policy by tensor midpoint quadrature
/// over the region the policy treats. `points` is the total budget; each
/// axis gets round(points^(1/dim)) nodes.
double true_policy_value(const ScenarioSpec& spec, const Policy& policy, Outcome outcome,
                         int points);

struct OracleTruth {
  std::vector<double> omega;  // per grid policy
  std::vector<double> psi;
  double omega_star = 0.0;
  double psi_l = 0.0;
  double psi_u = 0.0;
  std::vector<std::size_t> optimal_set;  // grid indices of Pi*
  std::size_t index_lower = 0;           // argmin psi over Pi*
  std::size_t index_upper = 0;           // argmax psi over Pi*
  double quadrature_error = 0.0;
  double tolerance = 0.0;

  std::string describe_optimal_set(const PolicyGrid& grid) const;
};

/// Pi* is every grid policy within 10x the estimated quadrature error of
/// the best Omega-value; psi_l/psi_u are the extremes of Psi over Pi*.
OracleTruth oracle_truth(const ScenarioSpec& spec, const PolicyGrid& grid,
                         int integration_points);

/// Wald bounds at the true extreme optimal policies, using estimates that
/// were computed on the same grid.
Interval oracle_ci(const OracleTruth& truth, const PolicyEstimates& estimates, double alpha);
/// Fits nuisances on `data` and evaluates only the two oracle policies.
Interval oracle_ci(const OracleTruth& truth, const PolicyGrid& grid, const Dataset& data,
                   const NuisanceRecipe& recipe, double alpha);

struct MarginPoint {
  double t = 0.0;
  double probability = 0.0;
  double bound = 0.0;  // t^-zeta
};

struct MarginCheck {
  bool pass = true;
  std::vector<MarginPoint> trace;
};

/// P(|s(X)| >= C1 t |q(X)|) <= t^-zeta for every t in the grid, with the
/// probability computed by midpoint quadrature (`points` total nodes).
MarginCheck check_margin(const ScenarioSpec& spec, double C1, double zeta,
                         std::span<const double> t_grid, int points);

/// Value curves along thresholds (1D) or diagonal boxes (a, a, a) (3D).
struct ValueCurvePoint {
  double a = 0.0;
  double omega = 0.0;
  double psi = 0.0;
};
std::vector<ValueCurvePoint> value_curve(const ScenarioSpec& spec, int resolution,
                                         int integration_points);

/// CATE curves along x1 (1D) or the diagonal (t, t, t) (3D).
struct CateCurvePoint {
  double x = 0.0;
  double q = 0.0;
  double s = 0.0;
};
std::vector<CateCurvePoint> cate_curve(const ScenarioSpec& spec, int resolution);

struct StudyConfig {
  std::string scenario = "non-unique";
  ScenarioOptions scenario_options;
  std::size_t n = 500;
  int grid = 2000;  // thresholds (1D) or approximate number of boxes (3D)
  int B = 1000;
  int replications = 1000;
  double alpha = 0.05;
  double beta = 0.01;
  int t_grid = 50;
  std::vector<Method> methods;  // empty: all methods valid for the scenario
  std::uint64_t seed = 0;
  NuisanceRecipe nuisance;
  bool band_cross_fit = false;
  OneStepOptions one_step;
  int optimizer_budget = 2000;
  int integration_points = 0;  // 0: default for the dimension
  bool keep_intervals = false;
};

struct MethodSummary {
  Method method = Method::union_bound;
  std::size_t covered = 0;
  double coverage = 0.0;
  double mean_width = 0.0;
};

struct ReplicateRecord {
  std::size_t replicate = 0;
  std::vector<Interval> intervals;  // aligned with CoverageReport::methods
};

struct CoverageReport {
  std::string scenario;
  std::size_t n = 0;
  int B = 0;
  int replications = 0;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double psi_l = 0.0;
  double psi_u = 0.0;
  std::vector<MethodSummary> methods;
  std::vector<ReplicateRecord> replicates;  // filled when keep_intervals
};

/// Policy grid the study uses for a scenario.
PolicyGrid study_grid(const ScenarioSpec& spec, int grid);

/// Intervals for one replicate, in the order of `methods`.
std::vector<Interval> run_replicate(const ScenarioSpec& spec, const PolicyGrid& grid,
                                    const OracleTruth& truth, const StudyConfig& config,
                                    std::span<const Method> methods, std::size_t replicate);

/// Replicates run in parallel; results depend only on the master seed.
CoverageReport run_study(const StudyConfig& config);

/// CSV: scenario,n,method,coverage,mean_width,replications,B,seed
std::string report_csv(const CoverageReport& report);
nlohmann::json report_json(const CoverageReport& report);
/// Fixed-width summary table (6 significant digits).
std::string report_table(const CoverageReport& report);

}  // namespace polband
