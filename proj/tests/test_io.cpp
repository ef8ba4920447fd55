#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "polband/io.hpp"

using namespace polband;

TEST_CASE("dataset CSV round-trips bit-exactly") {
  Dataset d = testutil::small_dataset(40, 3, 5);
  std::stringstream ss;
  write_dataset_csv(ss, d);
  CHECK(ss.str().rfind("x1,x2,x3,a,y_star,y_dag\n", 0) == 0);
  Dataset back = read_dataset_csv(ss);
  REQUIRE(back.size() == d.size());
  REQUIRE(back.dim() == 3);
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t k = 0; k < 3; ++k) CHECK(back.x(i)[k] == d.x(i)[k]);
    CHECK(back.actions()[i] == d.actions()[i]);
    CHECK(back.y_star()[i] == d.y_star()[i]);
    CHECK(back.y_dag()[i] == d.y_dag()[i]);
  }
}

TEST_CASE("CSV reader accepts CRLF and a byte-order mark") {
  std::istringstream in("\xEF\xBB\xBFx1,a,y_star,y_dag\r\n0.5,1,1,2\r\n-0.5,0,0,1\r\n");
  Dataset d = read_dataset_csv(in);
  CHECK(d.size() == 2);
  CHECK(d.x(1)[0] == -0.5);
}

TEST_CASE("CSV errors name the line") {
  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      read_dataset_csv(in);
    } catch (const FormatError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("x1,a,y_star,y_dagg\n0.5,1,1,2\n") == 1);
  CHECK(line_of("x2,a,y_star,y_dag\n0.5,1,1,2\n") == 1);
  CHECK(line_of("") == 1);
  CHECK(line_of("x1,a,y_star,y_dag\n0.5,1,1,2\n0.1,0,abc,2\n") == 3);
  CHECK(line_of("x1,a,y_star,y_dag\n0.5,1,1\n") == 2);
  CHECK(line_of("x1,a,y_star,y_dag\n0.5,1,1,2\n0.5,2,1,2\n") == 3);
  CHECK(line_of("x1,a,y_star,y_dag\n0.5,1,1,2\n0.5,0,nan,2\n") == 3);
  CHECK(line_of("x1,a,y_star,y_dag\n") == 1);

  std::istringstream bad("x1,a,y_star,y_dag\n0.5,1,1,2\n0.5,0,1x,2\n");
  CHECK_THROWS_WITH_AS(read_dataset_csv(bad), doctest::Contains("line 3"), FormatError);
}

TEST_CASE("single-arm CSV is a data error, not a format error") {
  std::istringstream in("x1,a,y_star,y_dag\n0.5,1,1,2\n0.1,1,1,2\n");
  try {
    read_dataset_csv(in);
    FAIL("expected an error");
  } catch (const FormatError&) {
    FAIL("single-arm data must not be reported as a format error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("both actions") != std::string::npos);
  }
}

TEST_CASE("policy grid JSON round-trips order and parameters") {
  std::vector<Policy> ps = {Policy::threshold(-0.25), Policy::box(0.1, -0.2, 0.3),
                            Policy::explicit_labels({1, 0, 1})};
  PolicyGrid g(ps, "mixed");
  PolicyGrid back = grid_from_json(grid_to_json(g));
  REQUIRE(back.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) CHECK(back[k] == g[k]);
  CHECK(back.provenance() == "mixed");

  PolicyGrid fine = grid_threshold(-1, 1, 101);
  PolicyGrid fine_back = grid_from_json(nlohmann::json::parse(grid_to_json(fine).dump()));
  for (std::size_t k = 0; k < fine.size(); ++k) CHECK(fine_back[k] == fine[k]);

  nlohmann::json bad = {{"provenance", "x"}, {"policies", {{{"kind", "tree"}}}}};
  CHECK_THROWS_AS(grid_from_json(bad), Error);
}

TEST_CASE("number formatting") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_sig(1.0 / 3.0, 6) == "0.333333");
  CHECK(format_sig(1.549, 6) == "1.549");
}
