#include "polband/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace polband {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_sig(double v, int digits) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, digits);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(std::string_view field, std::size_t line, std::string_view column) {
  double v = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw FormatError("column '" + std::string(column) + "': cannot parse '" +
                          std::string(field) + "' as a number",
                      line);
  }
  if (!std::isfinite(v)) {
    throw FormatError("column '" + std::string(column) + "': value must be finite", line);
  }
  return v;
}

}  // namespace

void write_dataset_csv(std::ostream& os, const Dataset& data) {
  const std::size_t d = data.dim();
  for (std::size_t k = 0; k < d; ++k) os << 'x' << (k + 1) << ',';
  os << "a,y_star,y_dag\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.x(i)) os << format_double(v) << ',';
    os << int(data.actions()[i]) << ',' << format_double(data.y_star()[i]) << ','
       << format_double(data.y_dag()[i]) << '\n';
  }
}

Dataset read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty input: missing header", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  auto header = split_fields(line);
  if (header.size() < 4) {
    throw FormatError("header must be x1,...,xd,a,y_star,y_dag", 1);
  }
  const std::size_t d = header.size() - 3;
  for (std::size_t k = 0; k < d; ++k) {
    if (header[k] != "x" + std::to_string(k + 1)) {
      throw FormatError("header column " + std::to_string(k + 1) + " is '" +
                            std::string(header[k]) + "', expected 'x" + std::to_string(k + 1) +
                            "'",
                        1);
    }
  }
  if (header[d] != "a" || header[d + 1] != "y_star" || header[d + 2] != "y_dag") {
    throw FormatError("header must end with a,y_star,y_dag", 1);
  }

  std::vector<double> xs;
  std::vector<std::uint8_t> a;
  std::vector<double> ys, yd;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != d + 3) {
      throw FormatError("expected " + std::to_string(d + 3) + " fields, found " +
                            std::to_string(fields.size()),
                        lineno);
    }
    for (std::size_t k = 0; k < d; ++k) xs.push_back(parse_number(fields[k], lineno, header[k]));
    if (fields[d] != "0" && fields[d] != "1") {
      throw FormatError("action must be 0 or 1, found '" + std::string(fields[d]) + "'", lineno);
    }
    a.push_back(fields[d] == "1" ? 1 : 0);
    ys.push_back(parse_number(fields[d + 1], lineno, "y_star"));
    yd.push_back(parse_number(fields[d + 2], lineno, "y_dag"));
  }
  if (a.empty()) throw FormatError("no data rows", lineno);
  return Dataset(Features(d, std::move(xs)), std::move(a), std::move(ys), std::move(yd));
}

Dataset read_dataset_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return read_dataset_csv(in);
}

void write_dataset_csv_file(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  write_dataset_csv(out, data);
}

nlohmann::json grid_to_json(const PolicyGrid& grid) {
  nlohmann::json policies = nlohmann::json::array();
  for (const Policy& p : grid.policies()) {
    const auto& rule = p.rule();
    if (const auto* t = std::get_if<ThresholdRule>(&rule)) {
      policies.push_back({{"kind", "threshold"}, {"a", t->a}});
    } else if (const auto* b = std::get_if<BoxRule>(&rule)) {
      policies.push_back({{"kind", "box"}, {"a", {b->a[0], b->a[1], b->a[2]}}});
    } else {
      policies.push_back({{"kind", "explicit"}, {"labels", std::get<ExplicitRule>(rule).labels}});
    }
  }
  return {{"provenance", grid.provenance()}, {"policies", std::move(policies)}};
}

PolicyGrid grid_from_json(const nlohmann::json& j) {
  std::vector<Policy> ps;
  for (const auto& item : j.at("policies")) {
    const std::string kind = item.at("kind").get<std::string>();
    if (kind == "threshold") {
      ps.push_back(Policy::threshold(item.at("a").get<double>()));
    } else if (kind == "box") {
      auto a = item.at("a").get<std::vector<double>>();
      if (a.size() != 3) throw Error("box policy needs 3 cutoffs");
      ps.push_back(Policy::box(a[0], a[1], a[2]));
    } else if (kind == "explicit") {
      ps.push_back(Policy::explicit_labels(item.at("labels").get<std::vector<std::uint8_t>>()));
    } else {
      throw Error("unknown policy kind '" + kind + "'");
    }
  }
  return PolicyGrid(std::move(ps), j.value("provenance", std::string{}));
}

}  // namespace polband
