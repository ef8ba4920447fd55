#include <doctest.h>

#include <cmath>

#include "polband/parallel.hpp"
#include "polband/simulate.hpp"

using namespace polband;

namespace {

ScenarioSpec custom(ScalarField q, ScalarField s, double base_dag = 0.0) {
  ScenarioSpec spec;
  spec.name = "custom";
  spec.dim = 1;
  spec.q_true = std::move(q);
  spec.s_true = std::move(s);
  spec.baseline_primary = [](std::span<const double>) { return 0.0; };
  spec.baseline_subsidiary = [base_dag](std::span<const double>) { return base_dag; };
  spec.propensity_true = [](std::span<const double>) { return 0.5; };
  return spec;
}

StudyConfig small_study(const std::string& scenario, int reps, std::uint64_t seed) {
  StudyConfig c;
  c.scenario = scenario;
  c.n = 200;
  c.grid = 201;
  c.B = 200;
  c.replications = reps;
  c.seed = seed;
  c.integration_points = 4000;
  return c;
}

}  // namespace

TEST_CASE("scenario catalogue") {
  CHECK(scenario_names().size() == 5);
  for (auto name : scenario_names()) {
    ScenarioSpec s = make_scenario(name);
    CHECK(s.name == name);
    CHECK((s.dim == 1 || s.dim == 3));
  }
  CHECK_THROWS_WITH_AS(make_scenario("nope"), doctest::Contains("unique-margin"), Error);
  CHECK_THROWS_AS(make_scenario("non-unique", {0.0, 0.5}), Error);
  CHECK_THROWS_AS(make_scenario("non-unique", {0.5, 1.5}), Error);
  ScenarioSpec nu = make_scenario("non-unique");
  for (double x : {-0.5, -0.3, 0.0}) {
    double v[] = {x};
    CHECK(nu.q_true(v) == 0.0);
  }
}

TEST_CASE("generate") {
  ScenarioSpec spec = make_scenario("unique-margin");
  CHECK_THROWS_AS(generate(spec, 0, 1), Error);
  Dataset a = generate(spec, 300, 5), b = generate(spec, 300, 5);
  CHECK(std::equal(a.y_dag().begin(), a.y_dag().end(), b.y_dag().begin()));
  CHECK(std::equal(a.features().values().begin(), a.features().values().end(),
                   b.features().values().begin()));
  Dataset big = generate(spec, 100000, 2);
  double share = static_cast<double>(big.count_action(1)) / 1e5;
  CHECK(std::abs(share - 0.5) < 0.01);

  // residual correlation of the two outcomes
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < big.size(); ++i) {
    double x = big.x(i)[0], act = big.actions()[i];
    double e1 = big.y_star()[i] - act * x, e2 = big.y_dag()[i] - act * x * x * x;
    sxy += e1 * e2;
    sxx += e1 * e1;
    syy += e2 * e2;
  }
  CHECK(std::abs(sxy / std::sqrt(sxx * syy) - 0.5) < 0.02);
  CHECK(std::abs(std::sqrt(sxx / 1e5) - 0.5) < 0.01);
}

TEST_CASE("quadrature against closed forms") {
  ScenarioSpec spec = make_scenario("unique-margin");
  for (double a : {-1.0, -0.37, 0.0, 0.5, 0.99}) {
    Policy p = Policy::threshold(a);
    CHECK(true_policy_value(spec, p, Outcome::primary, 2000) ==
          doctest::Approx((1 - a * a) / 4).epsilon(1e-9));
    CHECK(true_policy_value(spec, p, Outcome::subsidiary, 2000) ==
          doctest::Approx((1 - std::pow(a, 4)) / 8).epsilon(1e-9));
  }
  ScenarioSpec m3 = make_scenario("3d-margin");
  // q = min(x) over the box [0,1]^3: E = (1/8) * 1/4
  CHECK(true_policy_value(m3, Policy::box(0, 0, 0), Outcome::primary, 100000) ==
        doctest::Approx(0.03125).epsilon(1e-6));
  CHECK_THROWS_AS(true_policy_value(spec, Policy::explicit_labels({1}), Outcome::primary, 1000),
                  Error);
}

TEST_CASE("oracle truth on simple scenarios") {
  PolicyGrid grid = grid_threshold(-1, 1, 21);
  ScenarioSpec one = custom([](auto) { return 1.0; }, [](auto) { return 0.0; }, 3.0);
  OracleTruth t = oracle_truth(one, grid, 2000);
  CHECK(t.optimal_set == std::vector<std::size_t>{0});
  CHECK(t.psi_l == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(t.psi_u == doctest::Approx(3.0).epsilon(1e-12));
  CHECK_THROWS_AS(oracle_truth(one, grid, 999), Error);
}

TEST_CASE("non-unique truth") {
  ScenarioSpec spec = make_scenario("non-unique");
  PolicyGrid grid = grid_threshold(-1, 1, 2001);
  OracleTruth t = oracle_truth(spec, grid, default_integration_points(1));
  for (std::size_t k : t.optimal_set) {
    double a = std::get<ThresholdRule>(grid[k].rule()).a;
    CHECK(a >= -0.5 - 1e-9);
    CHECK(a <= 1e-9);
  }
  CHECK(t.optimal_set.size() >= 499);
  CHECK(std::abs(t.psi_u - t.psi_l - 0.5) < 0.01);
  OracleTruth fine = oracle_truth(spec, grid, 2 * default_integration_points(1));
  CHECK(std::abs(fine.psi_l - t.psi_l) < 1e-4);
  CHECK(std::abs(fine.psi_u - t.psi_u) < 1e-4);
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t k : t.optimal_set) {
    lo = std::min(lo, t.omega[k]);
    hi = std::max(hi, t.omega[k]);
  }
  CHECK(hi - lo < 1e-6);
}

TEST_CASE("unique truths are singletons and stable under refinement") {
  for (const char* name : {"unique-margin", "unique-non-margin"}) {
    ScenarioSpec spec = make_scenario(name);
    PolicyGrid grid = grid_threshold(-1, 1, 2001);
    OracleTruth t = oracle_truth(spec, grid, default_integration_points(1));
    CHECK(t.optimal_set.size() == 1);
    CHECK(t.psi_l == t.psi_u);
    OracleTruth fine = oracle_truth(spec, grid, 2 * default_integration_points(1));
    CHECK(std::abs(fine.psi_u - t.psi_u) < 1e-4);
  }
}

TEST_CASE("margin checker") {
  std::vector<double> ts = {1.5, 2, 3, 5, 10, 20};
  MarginCheck ok = check_margin(make_scenario("unique-margin"), 1.0, 3.0, ts, 100000);
  CHECK(ok.pass);
  for (auto& p : ok.trace) CHECK(p.probability < 1e-3);

  MarginCheck bad = check_margin(make_scenario("unique-non-margin"), 1.0, 2.5, ts, 100000);
  CHECK_FALSE(bad.pass);
  for (auto& p : bad.trace) {
    double exact = (std::min(0.3 / (p.t - 1), 1.0) + 0.3 / (p.t + 1)) / 2;
    CHECK(std::abs(p.probability - exact) < 1e-3);
    CHECK(p.bound == doctest::Approx(std::pow(p.t, -2.5)));
  }
  for (double zeta : {2.1, 3.0, 5.0})
    CHECK_FALSE(check_margin(make_scenario("unique-non-margin"), 1.0, zeta, ts, 100000).pass);

  ScenarioSpec zero = custom([](auto x) { return x[0]; }, [](auto) { return 0.0; });
  CHECK(check_margin(zero, 1.0, 50.0, ts, 1000).pass);
  CHECK_THROWS_AS(check_margin(zero, 1.0, 3.0, std::vector<double>{1.0}, 1000), Error);
}

TEST_CASE("curves") {
  ScenarioSpec nu = make_scenario("non-unique");
  auto vc = value_curve(nu, 201, 20000);
  CHECK(vc.size() == 201);
  double lo = INFINITY, hi = -INFINITY;
  for (auto& p : vc) {
    if (p.a >= -0.5 && p.a <= 0.0) {
      lo = std::min(lo, p.omega);
      hi = std::max(hi, p.omega);
    }
  }
  CHECK(hi - lo < 1e-4);
  auto cc = cate_curve(make_scenario("3d-margin"), 11);
  CHECK(cc.size() == 11);
  CHECK(cc[5].q == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("study basics") {
  StudyConfig c = small_study("unique-margin", 1, 3);
  c.methods = {Method::union_bound, Method::one_step};
  CoverageReport r = run_study(c);
  REQUIRE(r.methods.size() == 2);
  for (auto& m : r.methods) CHECK((m.coverage == 0.0 || m.coverage == 1.0));

  StudyConfig bad = small_study("unique-margin", 0, 3);
  CHECK_THROWS_AS(run_study(bad), Error);
  StudyConfig beta = small_study("unique-margin", 2, 3);
  beta.beta = 0.05;
  CHECK_THROWS_AS(run_study(beta), Error);
}

TEST_CASE("replicate failures carry the replicate index") {
  StudyConfig c = small_study("unique-margin", 60, 1);
  c.n = 6;
  c.methods = {Method::one_step};
  CHECK_THROWS_WITH_AS(run_study(c), doctest::Contains("replicate "), Error);
}

TEST_CASE("study results do not depend on the thread count") {
  StudyConfig c = small_study("non-unique", 6, 17);
  c.keep_intervals = true;
  int before = thread_count();
  set_thread_count(1);
  std::string one = report_csv(run_study(c));
  nlohmann::json j1 = report_json(run_study(c));
  set_thread_count(4);
  std::string four = report_csv(run_study(c));
  nlohmann::json j4 = report_json(run_study(c));
  set_thread_count(before);
  CHECK(one == four);
  CHECK(j1.dump() == j4.dump());
}

TEST_CASE("oracle width is a floor for the two-stage widths") {
  StudyConfig c = small_study("unique-margin", 200, 23);
  c.methods = {Method::union_bound, Method::joint, Method::oracle};
  CoverageReport r = run_study(c);
  const double oracle = r.methods[2].mean_width;
  CHECK(r.methods[0].mean_width >= oracle);
  CHECK(r.methods[1].mean_width >= oracle);
  CHECK(r.methods[2].coverage >= 0.85);
}

TEST_CASE("study csv layout") {
  StudyConfig c = small_study("unique-margin", 2, 4);
  c.methods = {Method::union_bound, Method::joint, Method::one_step};
  std::string csv = report_csv(run_study(c));
  CHECK(csv.rfind("scenario,n,method,coverage,mean_width,replications,B,seed\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}
