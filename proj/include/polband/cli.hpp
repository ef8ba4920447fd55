#pragma once

// Command-line front end: study, analyze, scenario-curves.

#include <iosfwd>

namespace polband {

/// Exit codes: 0 success, 1 runtime or statistical failure, 2 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace polband
