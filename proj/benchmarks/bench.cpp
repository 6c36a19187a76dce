#include "pllsim/analysis.hpp"
#include "pllsim/experiments.hpp"
#include "pllsim/integrator.hpp"
#include "pllsim/model.hpp"
#include "pllsim/signals.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

using namespace pllsim;

namespace {

void BM_EvaluateDerivatives(benchmark::State& state) {
    const PllParams p{.omega0 = 1.0, .kv = 0.8, .kd = 0.8, .ki = 0.5};
    std::vector<double> y{0.1, -0.2, 0.9, 0.3, 0.05};
    std::vector<double> dy(y.size());
    for (auto _ : state) {
        evaluate_derivatives(p, y, 0.7, 0.0, dy);
        benchmark::DoNotOptimize(dy.data());
        benchmark::ClobberMemory();
    }
}
BENCHMARK(BM_EvaluateDerivatives);

void BM_Rk4NodeStep(benchmark::State& state) {
    const PllParams p{.omega0 = 1.0, .kv = 0.8, .kd = 0.8};
    Rk4Stepper stepper(4);
    std::vector<double> y{0.1, -0.2, 0.9, 0.3};
    double t = 0.0;
    const double h = 0.01;
    for (auto _ : state) {
        stepper.step(
            [&p](double tt, std::span<const double> ys, std::span<double> dy) {
                evaluate_derivatives(p, ys, std::sin(1.02 * tt), 0.0, dy);
            },
            t, h, y);
        t += h;
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_Rk4NodeStep);

void BM_StandardNormal(benchmark::State& state) {
    std::uint64_t k = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(standard_normal(42, k++));
    }
}
BENCHMARK(BM_StandardNormal);

void BM_MetricsAccumulator(benchmark::State& state) {
    MetricsAccumulator acc(1.0, {0.0, 1e12});
    acc.push(0.0, 0.0);
    acc.push(0.01, 0.01001);
    double t = 0.02;
    for (auto _ : state) {
        acc.push(t, 1.001 * t);
        t += 0.01;
    }
    benchmark::DoNotOptimize(acc.finish());
}
BENCHMARK(BM_MetricsAccumulator);

void BM_Example1Run(benchmark::State& state) {
    const auto setup = example1_setup(0.01, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(evaluate_run(setup.params, setup.sim, setup.window));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(setup.sim.step_count()));
}
BENCHMARK(BM_Example1Run)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
