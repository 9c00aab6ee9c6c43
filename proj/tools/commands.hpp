#pragma once

#include <ostream>
#include <string>

#include "cfs/predictor.hpp"

namespace cfs::cli {

// Exit codes: 0 success, 1 validation or usage error, 2 I/O error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// "identity", an inline JSON object, or a path to a JSON profile.
MockConfig parse_mock_profile(const std::string& spec);

}  // namespace cfs::cli
