#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pllsim::cli {

/// Environment variable naming the default parent directory for results.
inline constexpr const char* kOutDirEnv = "PLLSIM_OUT_DIR";

/// `args` excludes the program name. Exit codes: 0 success, 1 runtime failure,
/// 2 usage or configuration error.
int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pllsim::cli
