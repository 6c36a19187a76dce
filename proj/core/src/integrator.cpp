#include "pllsim/integrator.hpp"
#include "pllsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pllsim {

namespace {

// Fraction of dt below which a leftover interval is treated as rounding noise.
constexpr double kRemainderTolerance = 1e-9;

std::uint64_t full_steps(double t_final, double dt) {
    const double ratio = t_final / dt;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) <= kRemainderTolerance * std::max(1.0, ratio)) {
        return static_cast<std::uint64_t>(nearest);
    }
    return static_cast<std::uint64_t>(std::floor(ratio));
}

}  // namespace

void SimConfig::validate() const {
    if (!std::isfinite(dt) || dt <= 0.0) {
        throw ConfigError("sim: dt must be positive and finite");
    }
    if (!std::isfinite(t_final) || t_final < dt) {
        throw ConfigError("sim: t_final must be finite and at least dt");
    }
    if (record_stride < 1) {
        throw ConfigError("sim: record_stride must be at least 1");
    }
    if (t_final / dt > 9.0e15) {
        throw ConfigError("sim: t_final / dt exceeds the step counter range");
    }
    input.validate();
    noise.validate();
    init.validate();
    if (initial_state && !initial_state->all_finite()) {
        throw ConfigError("sim: initial_state must be finite");
    }
}

std::uint64_t SimConfig::step_count() const {
    const std::uint64_t n = full_steps(t_final, dt);
    const double rest = t_final - static_cast<double>(n) * dt;
    return rest > kRemainderTolerance * dt ? n + 1 : n;
}

double SimConfig::time_at(std::uint64_t k) const {
    const std::uint64_t total = step_count();
    if (k >= total) {
        return t_final;
    }
    return static_cast<double>(k) * dt;
}

void Trajectory::append(const Sample& s) {
    t.push_back(s.t);
    states.push_back(s.state);
    u.push_back(s.u);
    v_d.push_back(s.v_d);
    v_c.push_back(s.v_c);
    omega_inst.push_back(s.omega_inst);
}

void integrate(const PllParams& params, const SimConfig& config, const SampleSink& sink) {
    params.validate();
    config.validate();

    NodeState state = config.initial_state
                          ? *config.initial_state
                          : sample_initial_state(config.init, params.filter.order(), params.has_integral());
    if (!state.matches(params)) {
        throw ConfigError("sim: initial_state layout does not match the parameters");
    }

    const NoiseSource noise(config.noise);
    const std::uint64_t total = config.step_count();
    const auto time_of = [&config, total](std::uint64_t k) {
        return k < total ? static_cast<double>(k) * config.dt : config.t_final;
    };
    const std::size_t stride = config.record_stride;

    const auto emit = [&](std::uint64_t k, double t) {
        const double u = input_sample(config.input, t, noise.sample(NoiseChannel::input, k));
        const double v_c = control_voltage(state, params.filter);
        const double w = params.omega0 + noise.sample(NoiseChannel::omega0, k) + params.kv * v_c +
                         params.ki * state.xi();
        sink(Sample{k, t, state, u, phase_detector_output(state.z1(), u, params.kd), v_c, w});
    };

    Rk4Stepper stepper(state.size());
    std::vector<double> last_finite(state.size());
    auto y = state.values();

    emit(0, 0.0);
    for (std::uint64_t k = 0; k < total; ++k) {
        const double t = time_of(k);
        const double h = time_of(k + 1) - t;
        const double u_noise = noise.sample(NoiseChannel::input, k);
        const double w_noise = noise.sample(NoiseChannel::omega0, k);

        std::copy(y.begin(), y.end(), last_finite.begin());
        stepper.step(
            [&](double ts, std::span<const double> ys, std::span<double> dy) {
                evaluate_derivatives(params, ys, input_sample(config.input, ts, u_noise), w_noise, dy);
            },
            t, h, y);

        if (!state.all_finite()) {
            std::ostringstream os;
            os << "simulation diverged in step " << k << " starting at t = " << t;
            throw DivergenceError(t, std::move(last_finite), os.str());
        }
        const std::uint64_t next = k + 1;
        if (next % stride == 0 || next == total) {
            emit(next, time_of(next));
        }
    }
}

Trajectory simulate(const PllParams& params, const SimConfig& config) {
    config.validate();
    Trajectory traj;
    const std::uint64_t expected = config.step_count() / config.record_stride + 2;
    traj.t.reserve(expected);
    traj.states.reserve(expected);
    traj.u.reserve(expected);
    traj.v_d.reserve(expected);
    traj.v_c.reserve(expected);
    traj.omega_inst.reserve(expected);
    integrate(params, config, [&traj](const Sample& s) { traj.append(s); });
    return traj;
}

}  // namespace pllsim
