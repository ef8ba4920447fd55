#include <iomanip>
#include <sstream>

#include "polband/io.hpp"
#include "polband/simulate.hpp"

namespace polband {

std::string report_csv(const CoverageReport& report) {
  std::ostringstream os;
  os << "scenario,n,method,coverage,mean_width,replications,B,seed\n";
  for (const MethodSummary& m : report.methods) {
    os << report.scenario << ',' << report.n << ',' << method_name(m.method) << ','
       << format_sig(m.coverage, 6) << ',' << format_sig(m.mean_width, 6) << ','
       << report.replications << ',' << report.B << ',' << report.seed << '\n';
  }
  return os.str();
}

nlohmann::json report_json(const CoverageReport& report) {
  nlohmann::json j;
  j["scenario"] = report.scenario;
  j["n"] = report.n;
  j["B"] = report.B;
  j["replications"] = report.replications;
  j["seed"] = report.seed;
  j["alpha"] = report.alpha;
  j["beta"] = report.beta;
  j["truth"] = {{"psi_l", report.psi_l}, {"psi_u", report.psi_u}};
  auto& methods = j["methods"] = nlohmann::json::array();
  for (const MethodSummary& m : report.methods) {
    methods.push_back({{"method", method_name(m.method)},
                       {"covered", m.covered},
                       {"coverage", m.coverage},
                       {"mean_width", m.mean_width}});
  }
  if (!report.replicates.empty()) {
    auto& reps = j["replicates"] = nlohmann::json::array();
    for (const ReplicateRecord& r : report.replicates) {
      nlohmann::json row;
      row["replicate"] = r.replicate;
      for (const Interval& iv : r.intervals) {
        row["intervals"][std::string(method_name(iv.method))] = {iv.lower, iv.upper};
      }
      reps.push_back(std::move(row));
    }
  }
  return j;
}

std::string report_table(const CoverageReport& report) {
  std::ostringstream os;
  os << "scenario " << report.scenario << "  n=" << report.n << "  B=" << report.B
     << "  replications=" << report.replications << "  seed=" << report.seed << '\n';
  os << "true interval [" << format_sig(report.psi_l, 6) << ", " << format_sig(report.psi_u, 6)
     << "]\n";
  os << std::left << std::setw(10) << "method" << std::right << std::setw(12) << "coverage"
     << std::setw(14) << "mean width" << '\n';
  for (const MethodSummary& m : report.methods) {
    os << std::left << std::setw(10) << method_name(m.method) << std::right << std::setw(12)
       << format_sig(m.coverage, 6) << std::setw(14) << format_sig(m.mean_width, 6) << '\n';
  }
  return os.str();
}

}  // namespace polband
