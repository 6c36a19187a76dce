#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pllsim {

/**
 * Strictly proper linear loop filter
 *
 *   F(s) = (b_m s^m + ... + b_1 s + b_0) / (s^n + a_{n-1} s^{n-1} + ... + a_0),  m < n.
 *
 * The denominator is stored monic; only a_0..a_{n-1} are kept. The filter is
 * realized in controllable canonical form: x_k' = x_{k+1}, x_n' = -sum a_k x_{k+1} + v_d,
 * with output v_c = sum b_k x_{k+1}.
 */
class FilterSpec {
public:
    /// Throws ConfigError unless n >= 1, the numerator is shorter than n and every coefficient is finite.
    FilterSpec(std::vector<double> denom_coeffs, std::vector<double> num_coeffs);

    /// Second-order loop filter (s + 4) / (12 s^2 + 6 s + 4), stored monic:
    /// a = (1/3, 1/2), b = (1/3, 1/12).
    static FilterSpec loop_filter_default();

    [[nodiscard]] std::size_t order() const noexcept { return denom_.size(); }
    [[nodiscard]] std::span<const double> denominator() const noexcept { return denom_; }
    [[nodiscard]] std::span<const double> numerator() const noexcept { return num_; }

    friend bool operator==(const FilterSpec&, const FilterSpec&) = default;

private:
    std::vector<double> denom_;
    std::vector<double> num_;
};

struct PllParams {
    double omega0 = 1.0;  ///< central frequency [rad/s]
    double kv = 0.0;      ///< VCO gain [rad/s per V]
    double kd = 0.0;      ///< phase-detector gain [1/V]
    double ki = 0.0;      ///< VCO integral gain [rad/s^2 per V]; 0 disables the integral state
    FilterSpec filter = FilterSpec::loop_filter_default();

    /// Throws ConfigError on omega0 <= 0, negative gains or non-finite values.
    void validate() const;

    [[nodiscard]] bool has_integral() const noexcept { return ki > 0.0; }

    friend bool operator==(const PllParams&, const PllParams&) = default;
};

/**
 * Instantaneous node state, stored flat as [x_1..x_n, z1, z2, (xi)].
 * xi, the running integral of v_c, exists only when the VCO has an integral term.
 */
class NodeState {
public:
    NodeState(std::size_t filter_order, bool has_integral);

    static NodeState zeros_for(const PllParams& params) {
        return NodeState(params.filter.order(), params.has_integral());
    }

    [[nodiscard]] std::size_t filter_order() const noexcept { return order_; }
    [[nodiscard]] bool has_integral() const noexcept { return has_integral_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

    [[nodiscard]] std::span<double> x() noexcept { return {values_.data(), order_}; }
    [[nodiscard]] std::span<const double> x() const noexcept { return {values_.data(), order_}; }

    [[nodiscard]] double& z1() noexcept { return values_[order_]; }
    [[nodiscard]] double z1() const noexcept { return values_[order_]; }
    [[nodiscard]] double& z2() noexcept { return values_[order_ + 1]; }
    [[nodiscard]] double z2() const noexcept { return values_[order_ + 1]; }

    /// 0 when the state carries no integral entry.
    [[nodiscard]] double xi() const noexcept { return has_integral_ ? values_[order_ + 2] : 0.0; }

    /// Throws std::logic_error when the state carries no integral entry.
    void set_xi(double value);

    [[nodiscard]] std::span<double> values() noexcept { return values_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

    [[nodiscard]] bool all_finite() const noexcept;

    /// Whether the layout (filter order and integral flag) matches the parameters.
    [[nodiscard]] bool matches(const PllParams& params) const noexcept {
        return order_ == params.filter.order() && has_integral_ == params.has_integral();
    }

    friend bool operator==(const NodeState&, const NodeState&) = default;

private:
    std::size_t order_;
    bool has_integral_;
    std::vector<double> values_;
};

/// Filter output v_c = sum_k b_k x_{k+1}.
[[nodiscard]] double control_voltage(const NodeState& state, const FilterSpec& filter) noexcept;

/// omega0 + Kv v_c + Ki xi.
[[nodiscard]] double instantaneous_frequency(const NodeState& state, const PllParams& params) noexcept;

/// Multiplier phase detector: v_d = Kd z1 u.
[[nodiscard]] constexpr double phase_detector_output(double z1, double u, double kd) noexcept {
    return kd * z1 * u;
}

/// Filter-chain derivative for a given detector output. dxdt must have the filter order.
void filter_derivative(const FilterSpec& filter, std::span<const double> x, double v_d,
                       std::span<double> dxdt) noexcept;

/**
 * Right-hand side of the node model on the flat state layout. No allocation and
 * no finiteness check; this is the integrator's hot path. omega0_noise is added
 * to omega0 before squaring.
 */
void evaluate_derivatives(const PllParams& params, std::span<const double> y, double u,
                          double omega0_noise, std::span<double> dydt) noexcept;

/// Checked wrapper over evaluate_derivatives. Throws DivergenceError on a
/// non-finite derivative and ConfigError on a layout mismatch.
[[nodiscard]] NodeState derivatives(const NodeState& state, double u, double omega0_noise,
                                    const PllParams& params);

struct FrequencyResponse {
    double magnitude = 0.0;
    double phase = 0.0;  ///< principal value, radians
};

/// F(j omega). Throws PoleOnAxisError when the denominator vanishes at j omega,
/// ConfigError for negative omega.
[[nodiscard]] FrequencyResponse filter_frequency_response(const FilterSpec& filter, double omega);

}  // namespace pllsim
