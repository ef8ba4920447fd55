#pragma once

// Wire formats: dataset CSV and policy-grid JSON.

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "polband/model.hpp"

namespace polband {

/// Thrown for malformed input files; `line` is 1-based (0 when unknown).
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Header `x1,...,xd,a,y_star,y_dag`; '.' decimals; full round-trip precision.
void write_dataset_csv(std::ostream& os, const Dataset& data);
Dataset read_dataset_csv(std::istream& is);
Dataset read_dataset_csv_file(const std::string& path);
void write_dataset_csv_file(const std::string& path, const Dataset& data);

nlohmann::json grid_to_json(const PolicyGrid& grid);
PolicyGrid grid_from_json(const nlohmann::json& j);

/// Shortest decimal representation that round-trips.
std::string format_double(double v);
/// Fixed number of significant digits, '.' decimal separator.
std::string format_sig(double v, int digits);

}  // namespace polband
