#include "polband/simulate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <random>
#include <sstream>

#include "polband/parallel.hpp"
#include "polband/rng.hpp"

namespace polband {

namespace {

constexpr std::array<std::string_view, 5> kScenarioNames = {
    "non-unique", "unique-margin", "unique-non-margin", "3d-margin", "3d-non-margin"};

double zero_field(std::span<const double>) { return 0.0; }
double half_field(std::span<const double>) { return 0.5; }

double min3(std::span<const double> x) { return std::min({x[0], x[1], x[2]}); }

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

// Evaluates q along x1 (1D) or the diagonal (3D).
double along_axis(const ScenarioSpec& spec, const ScalarField& f, double t) {
  std::array<double, 3> x{t, t, t};
  return f(std::span<const double>(x.data(), static_cast<std::size_t>(spec.dim)));
}

void validate_scenario(const ScenarioSpec& spec) {
  constexpr int kChecks = 4001;
  if (spec.name == "non-unique") {
    for (int i = 0; i < kChecks; ++i) {
      const double x = -1.0 + 2.0 * i / (kChecks - 1);
      const double q = along_axis(spec, spec.q_true, x);
      const bool ok = (x < -0.5) ? q < 0.0 : (x <= 0.0 ? q == 0.0 : q > 0.0);
      if (!ok) throw Error("scenario non-unique: q has the wrong sign at x = " + std::to_string(x));
    }
    return;
  }
  int changes = 0, last = 0;
  for (int i = 0; i < kChecks; ++i) {
    const double x = -1.0 + 2.0 * i / (kChecks - 1);
    const int s = sign_of(along_axis(spec, spec.q_true, x));
    if (s == 0) continue;
    if (last != 0 && s != last) ++changes;
    last = s;
  }
  if (changes != 1) {
    throw Error("scenario " + spec.name + ": q must change sign exactly once, found " +
                std::to_string(changes));
  }
}

// Lower corner of the region a threshold or box policy treats.
std::vector<double> treated_region(const Policy& policy, int dim) {
  std::vector<double> lo(static_cast<std::size_t>(dim), -1.0);
  if (const auto* t = std::get_if<ThresholdRule>(&policy.rule())) {
    lo[0] = std::clamp(t->a, -1.0, 1.0);
  } else if (const auto* b = std::get_if<BoxRule>(&policy.rule())) {
    if (dim < 3) throw Error("box policy needs a 3-dimensional scenario");
    for (int k = 0; k < 3; ++k) lo[k] = std::clamp(b->a[k], -1.0, 1.0);
  } else {
    throw Error("quadrature truth is defined only for threshold and box policies");
  }
  return lo;
}

// Per-axis node count, a multiple of 4 so two coarser levels exist.
int nodes_per_axis(int points, int dim) {
  if (points < 1) throw Error("quadrature needs at least one point");
  const double root = std::pow(points, 1.0 / dim);
  return std::max(4, 4 * static_cast<int>(std::lround(root / 4.0)));
}

// Midpoint rule for (1/2^d) * integral of f over prod_k [lo_k, 1].
double integrate_region(const ScalarField& f, std::span<const double> lo, int m) {
  const int d = static_cast<int>(lo.size());
  std::vector<double> h(lo.size());
  double cell = 1.0;
  for (int k = 0; k < d; ++k) {
    h[k] = (1.0 - lo[k]) / m;
    if (h[k] <= 0.0) return 0.0;
    cell *= h[k];
  }
  std::vector<double> x(lo.size());
  std::vector<int> idx(lo.size(), 0);
  double sum = 0.0;
  while (true) {
    for (int k = 0; k < d; ++k) x[k] = lo[k] + (idx[k] + 0.5) * h[k];
    sum += f(x);
    int k = d - 1;
    while (k >= 0 && ++idx[k] == m) idx[k--] = 0;
    if (k < 0) break;
  }
  return sum * cell / std::ldexp(1.0, d);
}

// Midpoint error is O(h^2) for the piecewise-smooth fields used here, so
// (4 I_m - I_{m/2}) / 3 removes the leading term. `coarse` is the same
// extrapolation one level down, used for the error estimate.
struct Extrapolated {
  double value = 0.0;
  double coarse = 0.0;
};

Extrapolated extrapolate(const ScalarField& f, std::span<const double> lo, int m) {
  const double fine = integrate_region(f, lo, m);
  const double half = integrate_region(f, lo, m / 2);
  const double quarter = integrate_region(f, lo, m / 4);
  return {(4.0 * fine - half) / 3.0, (4.0 * half - quarter) / 3.0};
}

const ScalarField& effect_of(const ScenarioSpec& spec, Outcome o) {
  return o == Outcome::primary ? spec.q_true : spec.s_true;
}

Extrapolated baseline_value(const ScenarioSpec& spec, Outcome o, int m) {
  const std::vector<double> cube(static_cast<std::size_t>(spec.dim), -1.0);
  return extrapolate(o == Outcome::primary ? spec.baseline_primary : spec.baseline_subsidiary,
                     cube, m);
}

Extrapolated extrapolated_value(const ScenarioSpec& spec, const Policy& policy, Outcome o, int m,
                                const Extrapolated& base) {
  const Extrapolated e = extrapolate(effect_of(spec, o), treated_region(policy, spec.dim), m);
  return {base.value + e.value, base.coarse + e.coarse};
}

}  // namespace

std::span<const std::string_view> scenario_names() { return kScenarioNames; }

ScenarioSpec make_scenario(std::string_view name, ScenarioOptions options) {
  if (!(options.noise_sd > 0.0)) throw Error("noise_sd must be positive");
  if (!(options.noise_corr >= -1.0 && options.noise_corr <= 1.0)) {
    throw Error("noise_corr must lie in [-1, 1]");
  }
  ScenarioSpec s;
  s.name = std::string(name);
  s.baseline_primary = zero_field;
  s.baseline_subsidiary = zero_field;
  s.propensity_true = half_field;
  s.noise_sd = options.noise_sd;
  s.noise_corr = options.noise_corr;

  if (name == "non-unique") {
    s.dim = 1;
    s.q_true = [](std::span<const double> x) {
      return x[0] < 0.0 ? std::min(x[0] + 0.5, 0.0) : x[0];
    };
    s.s_true = [](std::span<const double>) { return 2.0; };
  } else if (name == "unique-margin") {
    s.dim = 1;
    s.q_true = [](std::span<const double> x) { return x[0]; };
    s.s_true = [](std::span<const double> x) { return x[0] * x[0] * x[0]; };
  } else if (name == "unique-non-margin") {
    s.dim = 1;
    s.q_true = [](std::span<const double> x) { return x[0]; };
    s.s_true = [](std::span<const double> x) { return x[0] + 0.3; };
  } else if (name == "3d-margin") {
    s.dim = 3;
    s.q_true = min3;
    s.s_true = [](std::span<const double> x) {
      double q = min3(x);
      return q * q * q;
    };
  } else if (name == "3d-non-margin") {
    s.dim = 3;
    s.q_true = min3;
    s.s_true = [](std::span<const double> x) { return min3(x) + 0.3; };
  } else {
    std::string known;
    for (auto n : kScenarioNames) known += (known.empty() ? "" : ", ") + std::string(n);
    throw Error("unknown scenario '" + std::string(name) + "' (known: " + known + ")");
  }
  validate_scenario(s);
  return s;
}

Dataset generate(const ScenarioSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error("cannot generate an empty sample");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = static_cast<std::size_t>(spec.dim);
  const double rho = spec.noise_corr;
  const double rho_c = std::sqrt(std::max(0.0, 1.0 - rho * rho));

  std::vector<double> xs(n * d);
  std::vector<std::uint8_t> a(n);
  std::vector<double> ys(n), yd(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> x(xs.data() + i * d, d);
    for (double& v : x) v = unif(rng);
    const double p = spec.propensity_true(x);
    a[i] = coin(rng) < p ? 1 : 0;
    const double z1 = normal(rng), z2 = normal(rng);
    const double e_star = spec.noise_sd * z1;
    const double e_dag = spec.noise_sd * (rho * z1 + rho_c * z2);
    ys[i] = spec.baseline_primary(x) + a[i] * spec.q_true(x) + e_star;
    yd[i] = spec.baseline_subsidiary(x) + a[i] * spec.s_true(x) + e_dag;
  }
  return Dataset(Features(d, std::move(xs)), std::move(a), std::move(ys), std::move(yd));
}

int default_integration_points(int dim) { return dim == 1 ? 50000 : 100000; }

double true_policy_value(const ScenarioSpec& spec, const Policy& policy, Outcome outcome,
                         int points) {
  const int m = nodes_per_axis(points, spec.dim);
  return extrapolated_value(spec, policy, outcome, m, baseline_value(spec, outcome, m)).value;
}

std::string OracleTruth::describe_optimal_set(const PolicyGrid& grid) const {
  std::ostringstream os;
  os << optimal_set.size() << " policies";
  if (!optimal_set.empty()) {
    os << " from " << grid[optimal_set.front()].describe() << " to "
       << grid[optimal_set.back()].describe();
  }
  return os.str();
}

OracleTruth oracle_truth(const ScenarioSpec& spec, const PolicyGrid& grid,
                         int integration_points) {
  if (integration_points < 1000) throw Error("oracle truth needs at least 1000 integration points");
  const int m = nodes_per_axis(integration_points, spec.dim);
  const std::size_t K = grid.size();
  OracleTruth t;
  t.omega.resize(K);
  t.psi.resize(K);
  std::vector<double> coarse(K);
  for (std::size_t k = 0; k < K; ++k) treated_region(grid[k], spec.dim);  // validates kinds
  const Extrapolated base_primary = baseline_value(spec, Outcome::primary, m);
  const Extrapolated base_subsidiary = baseline_value(spec, Outcome::subsidiary, m);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t k = 0; k < K; ++k) {
    const Extrapolated w = extrapolated_value(spec, grid[k], Outcome::primary, m, base_primary);
    t.omega[k] = w.value;
    coarse[k] = w.coarse;
    t.psi[k] = extrapolated_value(spec, grid[k], Outcome::subsidiary, m, base_subsidiary).value;
  }
  // Error of the extrapolated value, bounded by its change from the next
  // coarser level.
  for (std::size_t k = 0; k < K; ++k) {
    t.quadrature_error = std::max(t.quadrature_error, std::abs(t.omega[k] - coarse[k]));
  }
  t.tolerance = 10.0 * t.quadrature_error + 1e-13;
  t.omega_star = *std::max_element(t.omega.begin(), t.omega.end());
  for (std::size_t k = 0; k < K; ++k) {
    if (t.omega[k] >= t.omega_star - t.tolerance) t.optimal_set.push_back(k);
  }
  t.index_lower = t.index_upper = t.optimal_set.front();
  for (std::size_t k : t.optimal_set) {
    if (t.psi[k] < t.psi[t.index_lower]) t.index_lower = k;
    if (t.psi[k] > t.psi[t.index_upper]) t.index_upper = k;
  }
  t.psi_l = t.psi[t.index_lower];
  t.psi_u = t.psi[t.index_upper];
  return t;
}

Interval oracle_ci(const OracleTruth& truth, const PolicyEstimates& est, double alpha) {
  if (truth.index_lower >= est.K || truth.index_upper >= est.K) {
    throw Error("oracle policies are not part of the estimated grid");
  }
  const double z = normal_quantile(1.0 - alpha / 2.0);
  const double root_n = std::sqrt(static_cast<double>(est.n));
  const std::size_t lo = truth.index_lower, hi = truth.index_upper;
  return {est.psi_hat[lo] - z * est.kappa_hat[lo] / root_n,
          est.psi_hat[hi] + z * est.kappa_hat[hi] / root_n, Method::oracle};
}

Interval oracle_ci(const OracleTruth& truth, const PolicyGrid& grid, const Dataset& data,
                   const NuisanceRecipe& recipe, double alpha) {
  NuisanceFit fit = fit_nuisance(data, recipe);
  PolicyGrid pair({grid[truth.index_lower]}, "oracle lower");
  if (truth.index_upper != truth.index_lower) {
    pair = PolicyGrid({grid[truth.index_lower], grid[truth.index_upper]}, "oracle pair");
  }
  PolicyEstimates est = estimate_all(pair, fit, data);
  OracleTruth local = truth;
  local.index_lower = 0;
  local.index_upper = pair.size() - 1;
  return oracle_ci(local, est, alpha);
}

MarginCheck check_margin(const ScenarioSpec& spec, double C1, double zeta,
                         std::span<const double> t_grid, int points) {
  if (!(C1 > 0.0)) throw Error("margin constant C1 must be positive");
  for (double t : t_grid) {
    if (!(t > 1.0)) throw Error("margin check needs t > 1");
  }
  const int m = nodes_per_axis(points, spec.dim);
  const int d = spec.dim;
  std::vector<double> ratio_lhs, ratio_rhs;  // |s|, |q| at every node
  std::vector<double> x(static_cast<std::size_t>(d));
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  const double h = 2.0 / m;
  while (true) {
    for (int k = 0; k < d; ++k) x[k] = -1.0 + (idx[k] + 0.5) * h;
    ratio_lhs.push_back(std::abs(spec.s_true(x)));
    ratio_rhs.push_back(std::abs(spec.q_true(x)));
    int k = d - 1;
    while (k >= 0 && ++idx[k] == m) idx[k--] = 0;
    if (k < 0) break;
  }
  MarginCheck out;
  const double total = static_cast<double>(ratio_lhs.size());
  for (double t : t_grid) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ratio_lhs.size(); ++i) {
      hits += ratio_lhs[i] >= C1 * t * ratio_rhs[i];
    }
    MarginPoint p{t, static_cast<double>(hits) / total, std::pow(t, -zeta)};
    out.pass = out.pass && p.probability <= p.bound;
    out.trace.push_back(p);
  }
  return out;
}

std::vector<ValueCurvePoint> value_curve(const ScenarioSpec& spec, int resolution,
                                         int integration_points) {
  if (resolution < 2) throw Error("curve resolution must be at least 2");
  std::vector<ValueCurvePoint> out(static_cast<std::size_t>(resolution));
  const int m = nodes_per_axis(integration_points, spec.dim);
  const Extrapolated base_primary = baseline_value(spec, Outcome::primary, m);
  const Extrapolated base_subsidiary = baseline_value(spec, Outcome::subsidiary, m);
#pragma omp parallel for schedule(dynamic, 8)
  for (int i = 0; i < resolution; ++i) {
    const double a = (i == resolution - 1) ? 1.0 : -1.0 + 2.0 * i / (resolution - 1);
    Policy p = spec.dim == 1 ? Policy::threshold(a) : Policy::box(a, a, a);
    out[i] = {a, extrapolated_value(spec, p, Outcome::primary, m, base_primary).value,
              extrapolated_value(spec, p, Outcome::subsidiary, m, base_subsidiary).value};
  }
  return out;
}

std::vector<CateCurvePoint> cate_curve(const ScenarioSpec& spec, int resolution) {
  if (resolution < 2) throw Error("curve resolution must be at least 2");
  std::vector<CateCurvePoint> out;
  out.reserve(static_cast<std::size_t>(resolution));
  for (int i = 0; i < resolution; ++i) {
    const double x = (i == resolution - 1) ? 1.0 : -1.0 + 2.0 * i / (resolution - 1);
    out.push_back({x, along_axis(spec, spec.q_true, x), along_axis(spec, spec.s_true, x)});
  }
  return out;
}

PolicyGrid study_grid(const ScenarioSpec& spec, int grid) {
  if (spec.dim == 1) return grid_threshold(-1.0, 1.0, grid);
  if (grid < 8) throw Error("3D study grid needs at least 8 boxes");
  // Odd per-axis count keeps the threshold 0 on every axis.
  int per_axis = static_cast<int>(std::lround(std::cbrt(static_cast<double>(grid))));
  if (per_axis % 2 == 0) ++per_axis;
  return grid_box(-1.0, 1.0, per_axis);
}

namespace {

bool wants(std::span<const Method> methods, Method m) {
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

std::vector<Method> resolve_methods(const ScenarioSpec& spec, const StudyConfig& config) {
  if (!config.methods.empty()) return config.methods;
  if (spec.dim == 1) {
    return {Method::union_bound, Method::joint, Method::one_step, Method::os_split,
            Method::oracle};
  }
  return {Method::union_bound, Method::joint, Method::one_step, Method::oracle};
}

NuisanceRecipe study_recipe(const ScenarioSpec& spec, const StudyConfig& config) {
  NuisanceRecipe r = config.nuisance;
  if (r.propensity.kind == PropensityMethod::Kind::known && !r.propensity.p1) {
    r.propensity.p1 = spec.propensity_true;
  }
  return r;
}

}  // namespace

std::vector<Interval> run_replicate(const ScenarioSpec& spec, const PolicyGrid& grid,
                                    const OracleTruth& truth, const StudyConfig& config,
                                    std::span<const Method> methods, std::size_t replicate) {
  const std::uint64_t seed = config.seed;
  const auto rep = static_cast<std::uint64_t>(replicate);
  auto role_seed = [&](StreamRole role) {
    return derive_seed(seed, rep, static_cast<std::uint64_t>(role));
  };
  const NuisanceRecipe recipe = study_recipe(spec, config);
  const Dataset data = generate(spec, config.n, role_seed(StreamRole::data));

  std::vector<Interval> out(methods.size());
  const bool need_bands = wants(methods, Method::union_bound) || wants(methods, Method::joint);
  const bool need_estimates = need_bands || wants(methods, Method::oracle);

  if (need_estimates) {
    const NuisanceFit fit =
        config.band_cross_fit
            ? cross_fit(data, config.one_step.folds, recipe, role_seed(StreamRole::folds))
            : fit_nuisance(data, recipe);
    PolicyGrid rep_grid = grid;
    if (spec.dim == 3 && need_bands && config.optimizer_budget > 0) {
      auto objective = [&](const Policy& p) {
        return value_estimate(p, fit, data, Outcome::primary).estimate;
      };
      Policy best = optimize_over_class(objective, ClassKind::box, {}, config.optimizer_budget,
                                        role_seed(StreamRole::optimizer));
      const auto ps = grid.policies();
      if (std::find(ps.begin(), ps.end(), best) == ps.end()) {
        rep_grid = grid.with_appended(best, "optimizer refinement");
      }
    }
    const PolicyEstimates est = estimate_all(rep_grid, fit, data);
    BandResult bands;
    if (need_bands) {
      BandConfig bc{config.B, config.alpha, config.beta, config.t_grid,
                    role_seed(StreamRole::bootstrap)};
      bands = compute_bands(est, bc);
    }
    for (std::size_t m = 0; m < methods.size(); ++m) {
      if (methods[m] == Method::union_bound) out[m] = bands.union_interval;
      if (methods[m] == Method::joint) out[m] = bands.joint_interval;
      if (methods[m] == Method::oracle) out[m] = oracle_ci(truth, est, config.alpha);
    }
  }
  for (std::size_t m = 0; m < methods.size(); ++m) {
    if (methods[m] == Method::one_step) {
      out[m] = one_step_ci(data, config.alpha, recipe, config.one_step,
                           role_seed(StreamRole::folds))
                   .interval;
    } else if (methods[m] == Method::os_split) {
      out[m] = os_split_ci(data, config.alpha, recipe, role_seed(StreamRole::split)).interval;
    }
  }
  return out;
}

CoverageReport run_study(const StudyConfig& config) {
  if (config.replications < 1) throw Error("replications must be at least 1");
  if (config.n < 4) throw Error("study sample size must be at least 4");
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
  const ScenarioSpec spec = make_scenario(config.scenario, config.scenario_options);
  const std::vector<Method> methods = resolve_methods(spec, config);
  const bool bands = wants(methods, Method::union_bound) || wants(methods, Method::joint);
  if (bands && !(config.beta > 0.0 && config.beta < config.alpha)) {
    throw Error("beta must lie in (0, alpha)");
  }
  const PolicyGrid grid = study_grid(spec, config.grid);
  const int points = config.integration_points > 0 ? config.integration_points
                                                   : default_integration_points(spec.dim);
  const OracleTruth truth = oracle_truth(spec, grid, points);

  const auto R = static_cast<std::size_t>(config.replications);
  std::vector<std::vector<Interval>> results(R);
  std::vector<std::exception_ptr> errors(R);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t r = 0; r < R; ++r) {
    try {
      results[r] = run_replicate(spec, grid, truth, config, methods, r);
    } catch (...) {
      errors[r] = std::current_exception();
    }
  }
  for (std::size_t r = 0; r < R; ++r) {
    if (!errors[r]) continue;
    try {
      std::rethrow_exception(errors[r]);
    } catch (const std::exception& e) {
      throw Error("replicate " + std::to_string(r) + ": " + e.what());
    }
  }

  CoverageReport rep;
  rep.scenario = spec.name;
  rep.n = config.n;
  rep.B = config.B;
  rep.replications = config.replications;
  rep.seed = config.seed;
  rep.alpha = config.alpha;
  rep.beta = config.beta;
  rep.psi_l = truth.psi_l;
  rep.psi_u = truth.psi_u;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    MethodSummary s;
    s.method = methods[m];
    double width = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      const Interval& iv = results[r][m];
      s.covered += iv.contains(truth.psi_l, truth.psi_u);
      width += iv.width();
    }
    s.coverage = static_cast<double>(s.covered) / static_cast<double>(R);
    s.mean_width = width / static_cast<double>(R);
    rep.methods.push_back(s);
  }
  if (config.keep_intervals) {
    for (std::size_t r = 0; r < R; ++r) rep.replicates.push_back({r, std::move(results[r])});
  }
  return rep;
}

}  // namespace polband
