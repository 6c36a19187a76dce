#pragma once

#include "pllsim/model.hpp"
#include "pllsim/signals.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace pllsim {

struct SimConfig {
    double dt = 0.01;
    double t_final = 2000.0;
    std::size_t record_stride = 1;
    InputSpec input;
    NoiseSpec noise;
    InitSpec init;
    /// Overrides the sampled initial condition when set.
    std::optional<NodeState> initial_state;

    void validate() const;

    /// Number of integration steps, counting a trailing partial step.
    [[nodiscard]] std::uint64_t step_count() const;
    /// Time at the end of step k (k = 0 is the initial time).
    [[nodiscard]] double time_at(std::uint64_t k) const;
};

/// One recorded point of a run, handed to sample sinks. `state` is only valid
/// for the duration of the callback.
struct Sample {
    std::uint64_t step = 0;
    double t = 0.0;
    const NodeState& state;
    double u = 0.0;
    double v_d = 0.0;
    double v_c = 0.0;
    double omega_inst = 0.0;
};

using SampleSink = std::function<void(const Sample&)>;

struct Trajectory {
    std::vector<double> t;
    std::vector<NodeState> states;
    std::vector<double> u;
    std::vector<double> v_d;
    std::vector<double> v_c;
    std::vector<double> omega_inst;

    [[nodiscard]] std::size_t size() const noexcept { return t.size(); }
    [[nodiscard]] bool empty() const noexcept { return t.empty(); }

    void append(const Sample& s);
};

/// Classical fourth-order Runge-Kutta step on a flat state with preallocated stages.
class Rk4Stepper {
public:
    explicit Rk4Stepper(std::size_t dim) : k1_(dim), k2_(dim), k3_(dim), k4_(dim), tmp_(dim) {}

    /// rhs(t, y, dydt) must fill dydt. Advances y in place from t to t + h.
    template <class Rhs>
    void step(Rhs&& rhs, double t, double h, std::span<double> y) {
        const std::size_t n = y.size();
        rhs(t, std::span<const double>(y), std::span<double>(k1_));
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + 0.5 * h * k1_[i];
        rhs(t + 0.5 * h, std::span<const double>(tmp_), std::span<double>(k2_));
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + 0.5 * h * k2_[i];
        rhs(t + 0.5 * h, std::span<const double>(tmp_), std::span<double>(k3_));
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * k3_[i];
        rhs(t + h, std::span<const double>(tmp_), std::span<double>(k4_));
        for (std::size_t i = 0; i < n; ++i) {
            y[i] += h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
        }
    }

private:
    std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

/**
 * Integrates the node model over [0, t_final] and hands every record_stride-th
 * step to `sink`, plus the final step. Input noise and omega0 noise for step k
 * are held constant across that step's four stages; the deterministic input is
 * evaluated at the exact stage times.
 *
 * Throws ConfigError for an invalid configuration and DivergenceError, with the
 * last finite time and state, when the state leaves the finite range.
 */
void integrate(const PllParams& params, const SimConfig& config, const SampleSink& sink);

/// integrate() into an in-memory Trajectory.
[[nodiscard]] Trajectory simulate(const PllParams& params, const SimConfig& config);

}  // namespace pllsim
