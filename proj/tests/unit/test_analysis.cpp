#include <catch2/catch_amalgamated.hpp>

#include "pllsim/analysis.hpp"
#include "pllsim/errors.hpp"
#include "pllsim/experiments.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace pllsim;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

// Trajectory whose oscillator states follow z1 = A cos(phi(t)), z2 = -A w sin(phi(t)).
template <class Phase>
Trajectory oscillator_trajectory(double t_end, double dt, double w, Phase phase) {
    Trajectory traj;
    const auto n = static_cast<std::size_t>(std::lround(t_end / dt));
    for (std::size_t k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) * dt;
        NodeState s(2, false);
        s.z1() = std::cos(phase(t));
        s.z2() = -w * std::sin(phase(t));
        traj.t.push_back(t);
        traj.states.push_back(s);
        traj.u.push_back(0.0);
        traj.v_d.push_back(0.0);
        traj.v_c.push_back(0.0);
        traj.omega_inst.push_back(w);
    }
    return traj;
}

PhaseSeries synthetic_phase(double t_end, double dt, const auto& psi) {
    PhaseSeries p;
    const auto n = static_cast<std::size_t>(std::lround(t_end / dt));
    for (std::size_t k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) * dt;
        p.t.push_back(t);
        p.psi.push_back(psi(t));
        p.wrapped.push_back(wrap_phase(psi(t)));
    }
    return p;
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxy += (x[k] - mx) * (y[k] - my);
        sxx += (x[k] - mx) * (x[k] - mx);
    }
    return sxy / sxx;
}

}  // namespace

TEST_CASE("wrap_phase and PhaseUnwrapper", "[analysis]") {
    CHECK(wrap_phase(0.0) == 0.0);
    CHECK(wrap_phase(kPi) == Approx(kPi));
    CHECK(wrap_phase(-kPi) == Approx(kPi));
    CHECK(wrap_phase(3 * kPi / 2) == Approx(-kPi / 2));
    CHECK(wrap_phase(1000.0) == Approx(std::remainder(1000.0, 2 * kPi)).margin(1e-12));

    PhaseUnwrapper u;
    CHECK(u.push(3.0) == 3.0);
    CHECK(u.push(-3.0) == Approx(2 * kPi - 3.0));
    CHECK(u.push(3.0) == Approx(3.0 + 0.0).margin(1e-12));
    u.reset();
    CHECK(u.push(-3.0) == -3.0);
}

TEST_CASE("unwrap of wrap is the identity", "[analysis][property]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> step(-0.99 * kPi, 0.99 * kPi);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> t, psi, wrapped;
        double value = wrap_phase(step(rng));
        for (int k = 0; k < 5000; ++k) {
            t.push_back(k);
            psi.push_back(value);
            wrapped.push_back(wrap_phase(value));
            value += step(rng);
        }
        const auto series = unwrap_series(t, wrapped);
        for (std::size_t k = 0; k < psi.size(); ++k) {
            REQUIRE(series.psi[k] == Approx(psi[k]).margin(1e-9));
            const double turns = (series.psi[k] - series.wrapped[k]) / (2 * kPi);
            CHECK(std::abs(turns - std::round(turns)) < 1e-9);
        }
    }
}

TEST_CASE("phase_from_state", "[analysis]") {
    SECTION("unit oscillator") {
        const auto traj = oscillator_trajectory(4 * kPi, 0.01, 1.0, [](double t) { return t; });
        const auto phase = phase_from_state(traj);
        for (std::size_t k = 0; k < phase.size(); ++k) {
            CHECK(phase.psi[k] == Approx(phase.t[k]).margin(1e-9));
        }
    }

    SECTION("elliptical orbit has the right mean slope") {
        const double w = 1.5;
        const auto traj = oscillator_trajectory(2000.0, 0.01, w, [w](double t) { return w * t; });
        const auto phase = phase_from_state(traj);
        CHECK(least_squares_slope(phase.t, phase.psi) == Approx(w).margin(1e-6));
    }

    SECTION("large wrapped jumps are removed") {
        // Phase advancing by 0.9 pi per sample wraps on almost every sample.
        const auto traj = oscillator_trajectory(200.0, 1.0, 1.0, [](double t) { return 0.9 * kPi * t; });
        const auto phase = phase_from_state(traj);
        for (std::size_t k = 1; k < phase.size(); ++k) {
            CHECK(phase.psi[k] - phase.psi[k - 1] == Approx(0.9 * kPi).margin(1e-9));
        }
    }

    SECTION("errors") {
        CHECK_THROWS_AS(phase_from_state(Trajectory{}), RangeError);
        auto traj = oscillator_trajectory(1.0, 0.1, 1.0, [](double t) { return t; });
        traj.states[4].z1() = 0.0;
        traj.states[4].z2() = 0.0;
        try {
            (void)phase_from_state(traj);
            FAIL("expected a degenerate-state error");
        } catch (const DegenerateStateError& e) {
            CHECK(e.sample_index() == 4);
        }
    }
}

TEST_CASE("phase_from_frequency", "[analysis]") {
    SECTION("constant frequency") {
        auto traj = oscillator_trajectory(10.0, 0.01, 1.0, [](double t) { return t; });
        const auto phase = phase_from_frequency(traj);
        CHECK(phase.psi.front() == 0.0);
        CHECK(phase.psi.back() == Approx(10.0).margin(1e-12));
    }

    SECTION("modulated frequency") {
        const double dt = 0.01;
        auto traj = oscillator_trajectory(2 * kPi, dt, 1.0, [](double t) { return t; });
        for (std::size_t k = 0; k < traj.size(); ++k) {
            traj.omega_inst[k] = 1.0 + 0.1 * std::sin(traj.t[k]);
        }
        // The grid ends at 628 dt, slightly short of 2 pi; compare with the exact integral there.
        const double t_end = traj.t.back();
        const double exact = t_end + 0.1 * (1.0 - std::cos(t_end));
        CHECK(phase_from_frequency(traj).psi.back() == Approx(exact).margin(1e-6));
    }
}

TEST_CASE("growth_rate", "[analysis]") {
    const auto linear = synthetic_phase(100.0, 0.01, [](double t) { return t; });
    CHECK(growth_rate(linear, {0.0, 100.0}) == Approx(1.0).epsilon(1e-12));

    const auto rippled = synthetic_phase(100.0, 0.01, [](double t) { return 1.02 * t + 0.01 * std::sin(2 * t); });
    CHECK(growth_rate(rippled, {50.0, 100.0}) == Approx(1.02).margin(4e-4));
    // Off-grid window ends are interpolated.
    CHECK(growth_rate(linear, {10.005, 20.0025}) == Approx(1.0).epsilon(1e-9));

    CHECK_THROWS_AS(growth_rate(linear, {50.0, 200.0}), RangeError);
    CHECK_THROWS_AS(growth_rate(linear, {60.0, 50.0}), RangeError);
}

TEST_CASE("metrics on closed-form phases", "[analysis][oracle]") {
    const double wi = 1.0;
    const TimeWindow window{0.0, 100.0};

    SECTION("constant offset") {
        const auto p = synthetic_phase(100.0, 0.01, [wi](double t) { return wi * t + 0.1; });
        const auto r = metrics_from_phase(p, wi, window);
        CHECK(r.f == Approx(0.0).margin(1e-12));
        CHECK(r.m == Approx(0.0).margin(1e-9));
        CHECK(r.s == Approx(0.0).margin(1e-9));
        CHECK(r.e_max == Approx(0.1).margin(1e-12));
        CHECK(r.omega_hat == Approx(wi).epsilon(1e-12));
        CHECK(r.freq_locked);
        CHECK(r.phase_entrained);
    }

    SECTION("frequency drift") {
        const auto p = synthetic_phase(100.0, 0.01, [wi](double t) { return (wi + 0.01) * t; });
        const auto r = metrics_from_phase(p, wi, window);
        CHECK(r.f == Approx(std::abs(1.0 - 1.0 / 1.01)).margin(1e-9));
        CHECK(r.f == Approx(9.901e-3).margin(1e-6));
        CHECK_FALSE(r.freq_locked);
        CHECK(r.m == Approx(0.01).margin(1e-9));
        CHECK(r.s == Approx(0.0).margin(1e-9));
        CHECK(r.e_max == Approx(1.0).margin(1e-9));
    }

    SECTION("sinusoidal phase modulation") {
        // psi = w t + a sin(b t). The first difference over dt is exactly
        // (w - wi) + a b_eff cos(b t_mid) with b_eff = 2 sin(b dt / 2) / dt.
        const double dt = 0.01, w = 1.003, a = 0.2, b = 0.7;
        const double t_end = 200.0;
        const auto p = synthetic_phase(t_end, dt, [=](double t) { return w * t + a * std::sin(b * t); });
        const auto r = metrics_from_phase(p, wi, {0.0, t_end});

        const double b_eff = 2.0 * std::sin(b * dt / 2.0) / dt;
        const auto n = static_cast<std::size_t>(std::lround(t_end / dt));
        double sum_abs = 0, sum = 0, sum_sq = 0;
        for (std::size_t k = 1; k <= n; ++k) {
            const double t_mid = (static_cast<double>(k) - 0.5) * dt;
            const double rate = (w - wi) + a * b_eff * std::cos(b * t_mid);
            sum_abs += std::abs(rate);
            sum += rate;
            sum_sq += rate * rate;
        }
        const double mean = sum / n;
        CHECK(r.m == Approx(sum_abs / n).margin(1e-6));
        CHECK(r.s == Approx(std::sqrt(sum_sq / n - mean * mean)).margin(1e-6));
        const double omega_exact = (p.psi.back() - p.psi.front()) / t_end;
        CHECK(r.omega_hat == Approx(omega_exact).margin(1e-12));
        CHECK(r.f == Approx(std::abs(1.0 - wi / omega_exact)).margin(1e-12));
    }

    SECTION("continuous-time limit of m and s") {
        // Integer number of modulation periods, no detuning: m -> 2 a b / pi, s -> a b / sqrt 2.
        const double a = 0.3, b = 2.0 * kPi / 10.0;
        const auto p = synthetic_phase(100.0, 0.001, [=](double t) { return wi * t + a * std::sin(b * t); });
        const auto r = metrics_from_phase(p, wi, {0.0, 100.0});
        CHECK(r.m == Approx(2.0 * a * b / kPi).epsilon(1e-4));
        CHECK(r.s == Approx(a * b / std::sqrt(2.0)).epsilon(1e-4));
    }

    SECTION("zero growth rate") {
        const auto p = synthetic_phase(10.0, 0.01, [](double) { return 0.5; });
        const auto r = metrics_from_phase(p, wi, {0.0, 10.0});
        CHECK(std::isinf(r.f));
        CHECK_FALSE(r.freq_locked);
    }
}

TEST_CASE("metrics are shift invariant", "[analysis][property]") {
    const auto base = [](double t) { return 1.01 * t + 0.05 * std::sin(3 * t); };
    const auto p0 = synthetic_phase(50.0, 0.01, base);
    for (double c : {-3.0, 0.4, 10.0}) {
        const auto p1 = synthetic_phase(50.0, 0.01, [&](double t) { return base(t) + c; });
        const auto r0 = metrics_from_phase(p0, 1.0, {25.0, 50.0});
        const auto r1 = metrics_from_phase(p1, 1.0, {25.0, 50.0});
        CHECK(r1.f == Approx(r0.f).margin(1e-9));
        CHECK(r1.m == Approx(r0.m).margin(1e-9));
        CHECK(r1.s == Approx(r0.s).margin(1e-9));
    }
}

TEST_CASE("MetricsAccumulator window handling", "[analysis]") {
    CHECK_THROWS_AS(MetricsAccumulator(1.0, {5.0, 5.0}), RangeError);
    CHECK_THROWS_AS(MetricsAccumulator(1.0, {0.0, NAN}), RangeError);
    MetricsAccumulator acc(1.0, {10.0, 20.0});
    acc.push(1.0, 1.0);
    acc.push(10.0, 10.0);
    CHECK(acc.sample_count() == 1);
    CHECK_THROWS_AS(acc.finish(), RangeError);
    acc.push(20.0, 20.0);
    acc.push(21.0, 21.0);
    CHECK(acc.sample_count() == 2);
    CHECK(acc.finish().f == 0.0);
}

TEST_CASE("StreamingMetrics agrees with the batch path", "[analysis][property]") {
    const auto setup = example1_setup(0.02, 3);
    const auto traj = simulate(setup.params, setup.sim);
    const auto batch = metrics(traj, setup.sim.input.omega_i, setup.window);

    StreamingMetrics streaming(setup.sim.input.omega_i, setup.window);
    integrate(setup.params, setup.sim, [&streaming](const Sample& s) { streaming.push(s); });
    const auto live = streaming.finish();
    CHECK(live.f == batch.f);
    CHECK(live.e_max == batch.e_max);
    CHECK(live.m == batch.m);
    CHECK(live.s == batch.s);
    CHECK(live.omega_hat == batch.omega_hat);
}

TEST_CASE("phase_error_differences", "[analysis]") {
    const auto p = synthetic_phase(20.0, 0.1, [](double t) { return 1.5 * t; });
    const auto d = phase_error_differences(p, 1.0);
    REQUIRE(d.t.size() == p.size() - 1);
    bool raw_jumped = false;
    for (std::size_t k = 0; k < d.t.size(); ++k) {
        CHECK(d.unwrapped[k] == Approx(0.05).margin(1e-9));
        CHECK(d.rate[k] == Approx(0.5).margin(1e-8));
        raw_jumped = raw_jumped || std::abs(d.raw[k]) > kPi;
    }
    CHECK(raw_jumped);
}

TEST_CASE("lissajous", "[analysis]") {
    Trajectory traj;
    for (int k = 0; k <= 100; ++k) {
        const double t = 0.1 * k;
        NodeState s(2, false);
        s.z1() = std::cos(t);
        s.z2() = -std::sin(t);
        traj.t.push_back(t);
        traj.states.push_back(s);
        traj.u.push_back(std::sin(t));
        traj.v_d.push_back(0);
        traj.v_c.push_back(0);
        traj.omega_inst.push_back(1);
    }
    const auto circle = lissajous(traj, {0.0, 10.0});
    REQUIRE(circle.size() == traj.size());
    for (const auto& [u, z1] : circle) {
        CHECK(u * u + z1 * z1 == Approx(1.0).epsilon(1e-12));
    }
    for (std::size_t k = 0; k < traj.size(); ++k) {
        traj.u[k] = traj.states[k].z1();
    }
    const auto diagonal = lissajous(traj, {5.0, 10.0});
    CHECK(diagonal.size() == 51);
    for (const auto& [u, z1] : diagonal) {
        CHECK(u == z1);
    }
}

TEST_CASE("Example 1 locks to the input rate", "[analysis]") {
    const auto setup = example1_setup(0.2, 0);
    const auto traj = simulate(setup.params, setup.sim);
    const auto phase = phase_from_state(traj);
    CHECK(growth_rate(phase, setup.window) == Approx(1.02).margin(2e-3));
}

TEST_CASE("Phase estimators agree on a locked Example 2 run", "[analysis]") {
    auto [proportional, integral] = example2_setup(0.2, 0);
    const auto traj = simulate(proportional.params, proportional.sim);
    const double from_state = growth_rate(phase_from_state(traj), proportional.window);
    const double from_freq = growth_rate(phase_from_frequency(traj), proportional.window);
    CHECK(from_state == Approx(from_freq).margin(1e-3));
}
