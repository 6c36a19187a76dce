#include "pllsim/diagnostics.hpp"
#include "pllsim/errors.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace pllsim {

DivergenceError::DivergenceError(double last_finite_time, std::vector<double> last_finite_state,
                                 const std::string& what)
    : Error(what), time_(last_finite_time), state_(std::move(last_finite_state)) {}

namespace {

std::mutex& handler_mutex() {
    static std::mutex m;
    return m;
}

WarningHandler& handler_slot() {
    static WarningHandler h;
    return h;
}

}  // namespace

WarningHandler set_warning_handler(WarningHandler handler) {
    std::lock_guard lock(handler_mutex());
    return std::exchange(handler_slot(), std::move(handler));
}

void warn(std::string_view message) {
    std::lock_guard lock(handler_mutex());
    if (auto& h = handler_slot()) {
        h(message);
    } else {
        std::cerr << "pllsim: warning: " << message << '\n';
    }
}

}  // namespace pllsim
