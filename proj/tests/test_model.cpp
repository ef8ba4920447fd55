#include <doctest.h>

#include <cmath>
#include <limits>

#include "polband/model.hpp"

using namespace polband;

namespace {

Dataset tiny() {
  std::vector<Observation> obs = {{{0.1}, 1, 1.0, 2.0}, {{-0.2}, 0, 0.5, 0.1}, {{0.4}, 1, 3.0, 1.0}};
  return Dataset(obs);
}

}  // namespace

TEST_CASE("dataset keeps columns and validates") {
  Dataset d = tiny();
  CHECK(d.size() == 3);
  CHECK(d.dim() == 1);
  CHECK(d.count_action(1) == 2);
  CHECK(d.y_star()[2] == 3.0);
  CHECK(d.observation(1).x[0] == -0.2);

  CHECK_THROWS_AS(Dataset(std::span<const Observation>{}), Error);
  std::vector<Observation> mixed = {{{0.1}, 1, 1, 1}, {{0.1, 0.2}, 0, 1, 1}};
  CHECK_THROWS_WITH_AS(Dataset{mixed}, doctest::Contains("dimension"), Error);
  std::vector<Observation> bad_a = {{{0.1}, 2, 1, 1}, {{0.1}, 0, 1, 1}};
  CHECK_THROWS_AS(Dataset{bad_a}, Error);
  std::vector<Observation> nan = {{{0.1}, 1, std::nan(""), 1}, {{0.1}, 0, 1, 1}};
  CHECK_THROWS_WITH_AS(Dataset{nan}, doctest::Contains("non-finite"), Error);
  std::vector<Observation> inf = {{{std::numeric_limits<double>::infinity()}, 1, 1, 1},
                                  {{0.1}, 0, 1, 1}};
  CHECK_THROWS_AS(Dataset{inf}, Error);
  std::vector<Observation> one_arm = {{{0.1}, 1, 1, 1}, {{0.2}, 1, 1, 1}};
  CHECK_THROWS_WITH_AS(Dataset{one_arm}, doctest::Contains("both actions"), Error);
}

TEST_CASE("dataset subset follows the requested row order") {
  Dataset d = tiny();
  std::vector<std::size_t> rows = {2, 1};
  Dataset s = d.subset(rows);
  CHECK(s.size() == 2);
  CHECK(s.x(0)[0] == 0.4);
  CHECK(s.y_dag()[1] == 0.1);
  std::vector<std::size_t> same_arm = {0, 2};
  CHECK_THROWS_AS(d.subset(same_arm), Error);
}

TEST_CASE("evaluate_policy examples") {
  Features xs(1, {-0.5, 0.0, 0.7});
  CHECK(evaluate_policy(Policy::threshold(0.0), xs) == std::vector<std::uint8_t>{0, 1, 1});

  Features boxes(3, {1, 1, 1, 1, -1, 1});
  CHECK(evaluate_policy(Policy::box(0, 0, 0), boxes) == std::vector<std::uint8_t>{1, 0});

  Policy e = Policy::explicit_labels({1, 0, 1});
  CHECK(evaluate_policy(e, xs) == std::vector<std::uint8_t>{1, 0, 1});
  CHECK_THROWS_AS(e.decide(xs.row(0)), Error);
  CHECK_THROWS_AS(evaluate_policy(Policy::explicit_labels({1, 0}), xs), Error);
  CHECK_THROWS_WITH_AS(evaluate_policy(Policy::box(0, 0, 0), xs), doctest::Contains("dimension"),
                       Error);
  CHECK_THROWS_AS(evaluate_policy(Policy::threshold(0), Features()), Error);
}

TEST_CASE("policy decisions are repeatable") {
  Features xs(3, {0.3, -0.2, 0.9, 0.0, 0.0, 0.0, -1, 1, 1});
  Policy p = Policy::box(-0.25, -0.25, 0.5);
  auto first = evaluate_policy(p, xs);
  for (int r = 0; r < 5; ++r) CHECK(evaluate_policy(p, xs) == first);
}

TEST_CASE("grid_threshold spacing and errors") {
  PolicyGrid g = grid_threshold(-1, 1, 3);
  REQUIRE(g.size() == 3);
  CHECK(g[0] == Policy::threshold(-1));
  CHECK(g[1] == Policy::threshold(0));
  CHECK(g[2] == Policy::threshold(1));
  CHECK(grid_threshold(-1, 1, 100000).size() == 100000);
  CHECK_THROWS_AS(grid_threshold(0, 0, 5), Error);
  CHECK_THROWS_AS(grid_threshold(-1, 1, 1), Error);
}

TEST_CASE("grid_box covers the tensor grid with 0 on odd axes") {
  PolicyGrid g = grid_box(-1, 1, 5);
  CHECK(g.size() == 125);
  bool has_origin = false;
  for (const auto& p : g.policies()) has_origin |= (p == Policy::box(0, 0, 0));
  CHECK(has_origin);
  CHECK_THROWS_AS(grid_box(-1, 1, 1), Error);
}

TEST_CASE("policy grid rejects empty and duplicate sets") {
  CHECK_THROWS_AS(PolicyGrid({}, "empty"), Error);
  CHECK_THROWS_WITH_AS(PolicyGrid({Policy::threshold(0.5), Policy::threshold(0.5)}, "dup"),
                       doctest::Contains("duplicate"), Error);
  PolicyGrid g({Policy::threshold(0.1)}, "one");
  PolicyGrid h = g.with_appended(Policy::threshold(0.2), "extra");
  CHECK(h.size() == 2);
  CHECK(h[0] == g[0]);
  CHECK_THROWS_AS(h.with_appended(Policy::threshold(0.1), "again"), Error);
}

TEST_CASE("method names round-trip") {
  for (Method m : {Method::union_bound, Method::joint, Method::one_step, Method::os_split,
                   Method::oracle}) {
    CHECK(parse_method(method_name(m)) == m);
  }
  CHECK(method_name(Method::union_bound) == "union");
  CHECK_THROWS_AS(parse_method("bootstrap"), Error);
}

TEST_CASE("interval containment") {
  Interval iv{0.0, 1.0, Method::joint};
  CHECK(iv.width() == 1.0);
  CHECK(iv.contains(0.0, 1.0));
  CHECK(iv.contains(0.2, 0.3));
  CHECK_FALSE(iv.contains(-0.1, 0.5));
  CHECK_FALSE(iv.contains(0.5, 1.1));
}
