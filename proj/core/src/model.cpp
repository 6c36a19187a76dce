#include "pllsim/model.hpp"
#include "pllsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <stdexcept>

namespace pllsim {

namespace {

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

}  // namespace

FilterSpec::FilterSpec(std::vector<double> denom_coeffs, std::vector<double> num_coeffs)
    : denom_(std::move(denom_coeffs)), num_(std::move(num_coeffs)) {
    if (denom_.empty()) {
        throw ConfigError("filter: order must be at least 1 (empty denominator)");
    }
    if (num_.empty()) {
        throw ConfigError("filter: numerator must have at least one coefficient");
    }
    if (num_.size() > denom_.size()) {
        std::ostringstream os;
        os << "filter: not strictly proper (" << num_.size() << " numerator coefficients for order "
           << denom_.size() << ")";
        throw ConfigError(os.str());
    }
    if (!all_finite(denom_) || !all_finite(num_)) {
        throw ConfigError("filter: coefficients must be finite");
    }
}

FilterSpec FilterSpec::loop_filter_default() {
    return FilterSpec({1.0 / 3.0, 1.0 / 2.0}, {1.0 / 3.0, 1.0 / 12.0});
}

void PllParams::validate() const {
    if (!std::isfinite(omega0) || omega0 <= 0.0) {
        throw ConfigError("params: omega0 must be positive and finite");
    }
    const auto check_gain = [](double g, const char* name) {
        if (!std::isfinite(g) || g < 0.0) {
            throw ConfigError(std::string("params: ") + name + " must be non-negative and finite");
        }
    };
    check_gain(kv, "kv");
    check_gain(kd, "kd");
    check_gain(ki, "ki");
}

NodeState::NodeState(std::size_t filter_order, bool has_integral)
    : order_(filter_order), has_integral_(has_integral),
      values_(filter_order + 2 + (has_integral ? 1 : 0), 0.0) {
    if (filter_order == 0) {
        throw ConfigError("state: filter order must be at least 1");
    }
}

void NodeState::set_xi(double value) {
    if (!has_integral_) {
        throw std::logic_error("state has no integral entry");
    }
    values_[order_ + 2] = value;
}

bool NodeState::all_finite() const noexcept {
    return pllsim::all_finite(values_);
}

double control_voltage(const NodeState& state, const FilterSpec& filter) noexcept {
    const auto b = filter.numerator();
    const auto x = state.x();
    double v = 0.0;
    for (std::size_t k = 0; k < b.size(); ++k) {
        v += b[k] * x[k];
    }
    return v;
}

double instantaneous_frequency(const NodeState& state, const PllParams& params) noexcept {
    return params.omega0 + params.kv * control_voltage(state, params.filter) + params.ki * state.xi();
}

void filter_derivative(const FilterSpec& filter, std::span<const double> x, double v_d,
                       std::span<double> dxdt) noexcept {
    const auto a = filter.denominator();
    const std::size_t n = a.size();
    double last = v_d;
    for (std::size_t k = 0; k < n; ++k) {
        last -= a[k] * x[k];
    }
    for (std::size_t k = 0; k + 1 < n; ++k) {
        dxdt[k] = x[k + 1];
    }
    dxdt[n - 1] = last;
}

void evaluate_derivatives(const PllParams& params, std::span<const double> y, double u,
                          double omega0_noise, std::span<double> dydt) noexcept {
    const std::size_t n = params.filter.order();
    const auto b = params.filter.numerator();
    const double z1 = y[n];
    const double z2 = y[n + 1];

    double v_c = 0.0;
    for (std::size_t k = 0; k < b.size(); ++k) {
        v_c += b[k] * y[k];
    }

    filter_derivative(params.filter, y.first(n), phase_detector_output(z1, u, params.kd),
                      dydt.first(n));

    double w = params.omega0 + omega0_noise + params.kv * v_c;
    if (params.has_integral()) {
        w += params.ki * y[n + 2];
        dydt[n + 2] = v_c;
    }
    dydt[n] = z2;
    dydt[n + 1] = -w * w * z1;
}

NodeState derivatives(const NodeState& state, double u, double omega0_noise, const PllParams& params) {
    if (!state.matches(params)) {
        throw ConfigError("derivatives: state layout does not match the parameters");
    }
    NodeState d(state.filter_order(), state.has_integral());
    evaluate_derivatives(params, state.values(), u, omega0_noise, d.values());
    if (!d.all_finite()) {
        const auto v = state.values();
        throw DivergenceError(std::nan(""), std::vector<double>(v.begin(), v.end()),
                              "derivatives: non-finite derivative");
    }
    return d;
}

FrequencyResponse filter_frequency_response(const FilterSpec& filter, double omega) {
    if (!(omega >= 0.0) || !std::isfinite(omega)) {
        throw ConfigError("frequency response: omega must be finite and non-negative");
    }
    const std::complex<double> s(0.0, omega);

    const auto horner = [&s](std::span<const double> c, std::complex<double> acc) {
        for (auto it = c.rbegin(); it != c.rend(); ++it) {
            acc = acc * s + *it;
        }
        return acc;
    };
    const auto num = horner(filter.numerator(), {0.0, 0.0});
    const auto den = horner(filter.denominator(), {1.0, 0.0});
    if (den == std::complex<double>(0.0, 0.0)) {
        std::ostringstream os;
        os << "frequency response: pole on the imaginary axis at omega = " << omega;
        throw PoleOnAxisError(os.str());
    }
    const auto h = num / den;
    return {std::abs(h), std::arg(h)};
}

}  // namespace pllsim
