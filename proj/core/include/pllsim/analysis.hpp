#pragma once

#include "pllsim/integrator.hpp"

#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

namespace pllsim {

/// |1 - omega_i / Omega_o| below this counts as frequency entrainment.
inline constexpr double kFrequencyLockThreshold = 2e-3;
/// |psi_o(t) - omega_i t| below this bound counts as phase entrainment.
inline constexpr double kPhaseEntrainmentBound = std::numbers::pi;

struct PhaseSeries {
    std::vector<double> t;
    std::vector<double> psi;      ///< unwrapped
    std::vector<double> wrapped;  ///< principal value in (-pi, pi]

    [[nodiscard]] std::size_t size() const noexcept { return t.size(); }
};

/// Closed evaluation interval [start, end] in seconds.
struct TimeWindow {
    double start = 0.0;
    double end = 0.0;

    /// [fraction * t_final, t_final]; fraction 0.5 is the usual "second half".
    static TimeWindow tail(double t_final, double fraction = 0.5) {
        return {fraction * t_final, t_final};
    }
};

struct MetricsRecord {
    double f = std::numeric_limits<double>::infinity();      ///< |1 - omega_i / Omega_o|
    double e_max = std::numeric_limits<double>::infinity();  ///< max |psi_o - omega_i t|, rad
    double m = std::numeric_limits<double>::infinity();      ///< mean |de/dt|, rad/s
    double s = std::numeric_limits<double>::infinity();      ///< population std of de/dt, rad/s
    double omega_hat = std::numeric_limits<double>::quiet_NaN();  ///< Omega_o, rad/s
    bool freq_locked = false;
    bool phase_entrained = false;

    /// The record reported for a diverged run.
    static MetricsRecord diverged() { return {}; }
};

/// Maps an angle to (-pi, pi].
[[nodiscard]] double wrap_phase(double angle) noexcept;

/// Streaming unwrapper: adds multiples of 2 pi so that successive outputs differ by at most pi.
class PhaseUnwrapper {
public:
    double push(double wrapped) noexcept;
    void reset() noexcept {
        started_ = false;
        turns_ = 0;
    }

private:
    bool started_ = false;
    double previous_wrapped_ = 0.0;
    std::int64_t turns_ = 0;
};

/// Output phase of an oscillator sample: atan2(-z2, z1), so that a forward
/// rotating oscillator (z2 = dz1/dt) has increasing phase.
[[nodiscard]] double oscillator_phase(double z1, double z2) noexcept;

[[nodiscard]] PhaseSeries unwrap_series(std::span<const double> t, std::span<const double> wrapped);

/// Phase from the oscillator states. Throws DegenerateStateError on z1 = z2 = 0
/// and RangeError on an empty trajectory.
[[nodiscard]] PhaseSeries phase_from_state(const Trajectory& traj);

/// Phase as the cumulative trapezoidal integral of omega_inst from psi(0) = 0.
[[nodiscard]] PhaseSeries phase_from_frequency(const Trajectory& traj);

/// Average phase growth rate (psi(t_b) - psi(t_a)) / (t_b - t_a), linearly
/// interpolating psi between samples. Throws RangeError outside the series.
[[nodiscard]] double growth_rate(const PhaseSeries& phase, TimeWindow window);

/**
 * Single-pass metric evaluation over a window. Samples outside the window are
 * ignored, so a whole run can be streamed through without storing it.
 * e = psi_o - omega_i t; de/dt is the first difference divided by the sample spacing.
 */
class MetricsAccumulator {
public:
    MetricsAccumulator(double omega_i, TimeWindow window);

    void push(double t, double psi) noexcept;

    [[nodiscard]] std::size_t sample_count() const noexcept { return count_; }

    /// Throws RangeError when fewer than two samples fell inside the window.
    [[nodiscard]] MetricsRecord finish() const;

private:
    double omega_i_;
    TimeWindow window_;
    std::size_t count_ = 0;
    double first_t_ = 0.0, first_psi_ = 0.0;
    double last_t_ = 0.0, last_psi_ = 0.0;
    double e_max_ = 0.0;
    // Welford accumulators over de/dt
    std::size_t rate_count_ = 0;
    double rate_mean_ = 0.0, rate_m2_ = 0.0, abs_rate_sum_ = 0.0;
};

/// Phase tracking plus MetricsAccumulator fed straight from integrator samples.
/// Gives bit-identical results to metrics() on the recorded trajectory.
class StreamingMetrics {
public:
    StreamingMetrics(double omega_i, TimeWindow window) : accumulator_(omega_i, window) {}

    /// Throws DegenerateStateError when z1 = z2 = 0.
    void push(const Sample& sample);

    [[nodiscard]] MetricsRecord finish() const { return accumulator_.finish(); }

private:
    PhaseUnwrapper unwrapper_;
    MetricsAccumulator accumulator_;
    std::size_t index_ = 0;
};

/// Window tolerance used when deciding whether a sample time lies inside a window.
[[nodiscard]] bool in_window(double t, TimeWindow window) noexcept;

[[nodiscard]] MetricsRecord metrics_from_phase(const PhaseSeries& phase, double omega_i, TimeWindow window);

/// Metrics of a trajectory using the state-based phase estimate.
[[nodiscard]] MetricsRecord metrics(const Trajectory& traj, double omega_i, TimeWindow window);

/// First differences of e = psi_o - omega_i t. `raw` uses the wrapped phase and
/// keeps the 2 pi jumps of the arctangent; `unwrapped` uses psi; `rate` is
/// `unwrapped` divided by the sample spacing.
struct PhaseErrorDifferences {
    std::vector<double> t;
    std::vector<double> raw;
    std::vector<double> unwrapped;
    std::vector<double> rate;
};

[[nodiscard]] PhaseErrorDifferences phase_error_differences(const PhaseSeries& phase, double omega_i);

/// (u, z1) pairs inside the window.
[[nodiscard]] std::vector<std::pair<double, double>> lissajous(const Trajectory& traj, TimeWindow window);

}  // namespace pllsim
