#pragma once

#include <functional>
#include <string_view>

namespace pllsim {

using WarningHandler = std::function<void(std::string_view)>;

/// Replaces the process-wide warning sink. Passing an empty handler restores
/// the default, which writes to std::cerr. Returns the previous handler.
WarningHandler set_warning_handler(WarningHandler handler);

void warn(std::string_view message);

}  // namespace pllsim
