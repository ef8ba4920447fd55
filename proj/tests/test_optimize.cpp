#include <doctest.h>

#include <cmath>

#include "polband/bands.hpp"

using namespace polband;

namespace {

const std::array<double, 3>& box_of(const Policy& p) { return std::get<BoxRule>(p.rule()).a; }

}  // namespace

TEST_CASE("threshold class is an exact grid search") {
  auto obj = [](const Policy& p) {
    double a = std::get<ThresholdRule>(p.rule()).a;
    return -(a - 0.3) * (a - 0.3);
  };
  Policy p = optimize_over_class(obj, ClassKind::threshold, {-1, 1, 201}, 1, 0);
  CHECK(std::get<ThresholdRule>(p.rule()).a == doctest::Approx(0.3).epsilon(1e-12));
  Policy q = optimize_over_class(obj, ClassKind::threshold, {-1, 1, 8}, 1, 0);
  CHECK(std::get<ThresholdRule>(q.rule()).a == doctest::Approx(-1.0 + 2.0 * 5 / 7));
}

TEST_CASE("box class finds a separable concave optimum") {
  int evals = 0;
  auto obj = [&](const Policy& p) {
    ++evals;
    const auto& a = box_of(p);
    return -(a[0] * a[0] + 2 * a[1] * a[1] + 0.5 * a[2] * a[2]);
  };
  Policy p = optimize_over_class(obj, ClassKind::box, {}, 2000, 11);
  CHECK(evals <= 2000);
  for (double v : box_of(p)) CHECK(std::abs(v) < 0.05);
  CHECK(optimize_over_class(obj, ClassKind::box, {}, 2000, 11) == p);
}

TEST_CASE("budget of one returns the single sample") {
  std::vector<Policy> seen;
  auto obj = [&](const Policy& p) {
    seen.push_back(p);
    return 0.0;
  };
  Policy p = optimize_over_class(obj, ClassKind::box, {}, 1, 5);
  REQUIRE(seen.size() == 1);
  CHECK(p == seen[0]);
  for (double v : box_of(p)) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(optimize_over_class(obj, ClassKind::box, {}, 0, 5), Error);
  CHECK_THROWS_AS(optimize_over_class(obj, ClassKind::box, {1, -1}, 10, 5), Error);
}
