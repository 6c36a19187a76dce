#include <catch2/catch_amalgamated.hpp>

#include "pllsim/errors.hpp"
#include "pllsim/experiments.hpp"
#include "pllsim/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

using namespace pllsim;
using Catch::Approx;

namespace {

SimConfig bare_config(double dt, double t_final) {
    SimConfig c;
    c.dt = dt;
    c.t_final = t_final;
    NodeState s(2, false);
    s.z1() = 1.0;
    c.initial_state = s;
    return c;
}

double rk4_decay_error(double h, double t_end) {
    Rk4Stepper stepper(1);
    std::vector<double> y{1.0};
    const int n = static_cast<int>(std::lround(t_end / h));
    for (int k = 0; k < n; ++k) {
        stepper.step([](double, std::span<const double> ys, std::span<double> dy) { dy[0] = -ys[0]; }, k * h, h, y);
    }
    return std::abs(y[0] - std::exp(-t_end));
}

}  // namespace

TEST_CASE("SimConfig validation and step counting", "[integrator]") {
    SimConfig c;
    CHECK_NOTHROW(c.validate());
    c.dt = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SimConfig{};
    c.t_final = 0.001;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SimConfig{};
    c.record_stride = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    SimConfig exact;
    exact.dt = 0.01;
    exact.t_final = 2000.0;
    CHECK(exact.step_count() == 200000);
    CHECK(exact.time_at(200000) == 2000.0);

    SimConfig partial;
    partial.dt = 0.3;
    partial.t_final = 1.0;
    CHECK(partial.step_count() == 4);
    CHECK(partial.time_at(3) == Approx(0.9));
    CHECK(partial.time_at(4) == 1.0);

    SimConfig long_run;
    long_run.dt = std::numbers::pi / 300.0;
    long_run.t_final = 10000.0;
    CHECK(long_run.step_count() == 954930);
}

TEST_CASE("Bare oscillator returns after one period", "[integrator]") {
    const PllParams p{.omega0 = 1.0};
    const auto traj = simulate(p, bare_config(0.01, 2.0 * std::numbers::pi));
    CHECK(traj.t.back() == 2.0 * std::numbers::pi);
    CHECK(traj.states.back().z1() == Approx(1.0).margin(1e-9));
    CHECK(traj.states.back().z2() == Approx(0.0).margin(1e-9));
}

TEST_CASE("RK4 converges with order 4 on y' = -y", "[integrator][oracle]") {
    const double e1 = rk4_decay_error(0.1, 5.0);
    const double e2 = rk4_decay_error(0.05, 5.0);
    const double order = std::log2(e1 / e2);
    CHECK(order == Approx(4.0).margin(0.2));
    CHECK(e1 / e2 == Approx(16.0).epsilon(0.1));
}

TEST_CASE("Bare oscillator energy drift", "[integrator][property]") {
    for (double omega0 : {0.5, 1.0, 1.8}) {
        const PllParams p{.omega0 = omega0};
        auto config = bare_config(0.01, 100.0);
        config.initial_state->z2() = 0.3;
        const auto traj = simulate(p, config);
        REQUIRE(traj.size() == 10001);
        const auto energy = [omega0](const NodeState& s) {
            return omega0 * omega0 * s.z1() * s.z1() + s.z2() * s.z2();
        };
        const double e0 = energy(traj.states.front());
        double worst = 0.0;
        for (const auto& s : traj.states) {
            worst = std::max(worst, std::abs(energy(s) - e0) / e0);
        }
        CHECK(worst < 1e-8);
    }
}

TEST_CASE("Reruns are bit-identical", "[integrator][property]") {
    PllParams p{.omega0 = 1.0, .kv = 0.8, .kd = 0.8, .ki = 0.1};
    SimConfig c;
    c.dt = 0.01;
    c.t_final = 50.0;
    c.noise = {0.01, 0.01, 17};
    c.init = {0.01, 3};
    const auto a = simulate(p, c);
    const auto b = simulate(p, c);
    CHECK(a.t == b.t);
    CHECK(a.states == b.states);
    CHECK(a.u == b.u);
    CHECK(a.v_c == b.v_c);
    CHECK(a.omega_inst == b.omega_inst);
}

TEST_CASE("Recording stride is an exact subsampling", "[integrator][property]") {
    PllParams p{.omega0 = 1.0, .kv = 0.7, .kd = 0.7};
    SimConfig c;
    c.dt = 0.01;
    c.t_final = 10.005;  // forces a trailing partial step
    c.noise = {0.01, 0.01, 5};
    const auto full = simulate(p, c);
    c.record_stride = 7;
    const auto sub = simulate(p, c);

    const std::size_t steps = c.step_count();
    REQUIRE(full.size() == steps + 1);
    std::vector<std::size_t> expected;
    for (std::size_t k = 0; k <= steps; k += 7) {
        expected.push_back(k);
    }
    if (expected.back() != steps) {
        expected.push_back(steps);
    }
    REQUIRE(sub.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const auto k = expected[i];
        CHECK(sub.t[i] == full.t[k]);
        CHECK(sub.states[i] == full.states[k]);
        CHECK(sub.u[i] == full.u[k]);
        CHECK(sub.omega_inst[i] == full.omega_inst[k]);
    }
}

TEST_CASE("Trajectory shape and time grid", "[integrator]") {
    PllParams p{.omega0 = 1.0, .kv = 0.7, .kd = 0.7};
    SimConfig c;
    c.dt = 0.01;
    c.t_final = 1.0;
    c.record_stride = 10;
    const auto traj = simulate(p, c);
    REQUIRE(traj.size() == 11);
    CHECK(traj.states.size() == traj.size());
    CHECK(traj.u.size() == traj.size());
    CHECK(traj.v_d.size() == traj.size());
    CHECK(traj.v_c.size() == traj.size());
    CHECK(traj.omega_inst.size() == traj.size());
    CHECK(traj.t.front() == 0.0);
    CHECK(traj.t.back() == 1.0);
    for (std::size_t k = 1; k < traj.size(); ++k) {
        CHECK(traj.t[k] - traj.t[k - 1] == Approx(0.1).epsilon(1e-9));
    }
    for (std::size_t k = 0; k < traj.size(); ++k) {
        CHECK(traj.v_c[k] == control_voltage(traj.states[k], p.filter));
        CHECK(traj.v_d[k] == phase_detector_output(traj.states[k].z1(), traj.u[k], p.kd));
    }
}

TEST_CASE("Noise is one sample per step", "[integrator]") {
    PllParams p{.omega0 = 1.0, .kv = 0.7, .kd = 0.7};
    SimConfig c;
    c.dt = 0.01;
    c.t_final = 1.0;
    c.input = {1.0, 1.02};
    c.noise = {0.01, 0.04, 9};
    const auto traj = simulate(p, c);
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double clean = std::sin(1.02 * traj.t[k]);
        CHECK(traj.u[k] - clean == Approx(noise_stream(c.noise, NoiseChannel::input, k)).margin(1e-15));
        const double w = instantaneous_frequency(traj.states[k], p);
        CHECK(traj.omega_inst[k] - w == Approx(noise_stream(c.noise, NoiseChannel::omega0, k)).margin(1e-14));
    }
}

TEST_CASE("Divergence carries the last finite state", "[integrator]") {
    PllParams p{.omega0 = 1.0, .kv = 1e3, .kd = 1e3};
    SimConfig c;
    c.dt = 0.5;
    c.t_final = 1000.0;
    NodeState s(2, false);
    s.x()[0] = 1e120;
    s.z1() = 1e60;
    c.initial_state = s;
    try {
        (void)simulate(p, c);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(std::isfinite(e.time()));
        CHECK(e.state().size() == 4);
        CHECK(std::all_of(e.state().begin(), e.state().end(), [](double v) { return std::isfinite(v); }));
    }
}

TEST_CASE("Initial state layout must match", "[integrator]") {
    PllParams p{.omega0 = 1.0, .kv = 0.7, .kd = 0.7, .ki = 0.5};
    SimConfig c;
    c.t_final = 1.0;
    c.initial_state = NodeState(2, false);
    CHECK_THROWS_AS(simulate(p, c), ConfigError);
}

TEST_CASE("Example 1 control voltage keeps a ripple", "[integrator]") {
    const auto setup = example1_setup(0.2, 0);
    const auto traj = simulate(setup.params, setup.sim);
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        if (traj.t[k] >= setup.window.start) {
            lo = std::min(lo, traj.v_c[k]);
            hi = std::max(hi, traj.v_c[k]);
        }
    }
    CHECK(hi - lo > 0.0);
    CHECK(std::isfinite(hi - lo));
}
