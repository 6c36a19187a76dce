#include "pllsim/experiments.hpp"
#include "pllsim/config.hpp"
#include "pllsim/errors.hpp"
#include "pllsim/persist.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

namespace pllsim {

namespace {

constexpr double kStudyNoiseVariance = 0.01;

double elapsed_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void require_fraction(double fraction, std::string_view owner) {
    if (!std::isfinite(fraction) || fraction < 0.0 || fraction >= 1.0) {
        throw ConfigError(std::string(owner) + ": window_start_fraction must lie in [0, 1)");
    }
}

double scaled_horizon(double scale) {
    if (!std::isfinite(scale) || scale <= 0.0) {
        throw ConfigError("scale must be positive and finite");
    }
    return kFullHorizon * scale;
}

Json outcome_json(const RunOutcome& o) {
    Json j = {{"metrics", to_json(o.metrics)}, {"diverged", o.diverged}};
    if (o.diverged) {
        j["diagnostic"] = o.diagnostic;
    } else {
        j["mean_frequency_error"] = o.mean_frequency_error;
        j["v_c_peak_to_peak"] = o.v_c_max - o.v_c_min;
        j["v_c_mean_abs"] = o.v_c_mean_abs;
    }
    return j;
}

Json single_run_json(const SingleRunSetup& s) {
    return {{"params", to_json(s.params)},
            {"sim", to_json(s.sim)},
            {"window", {{"start", s.window.start}, {"end", s.window.end}}}};
}

Json quantiles_json(const std::optional<Quantiles>& q) {
    if (!q) {
        return nullptr;
    }
    return {{"min", q->min}, {"q25", q->q25}, {"median", q->median}, {"q75", q->q75}, {"max", q->max}};
}

Json summary_json(const McSummary& s) {
    Json below = Json::array();
    for (const auto& [threshold, fraction] : s.fraction_f_below) {
        below.push_back({{"threshold", threshold}, {"fraction", fraction}});
    }
    return {{"diverged", s.diverged},
            {"f", quantiles_json(s.f)},
            {"m", quantiles_json(s.m)},
            {"s", quantiles_json(s.s)},
            {"fraction_f_below", below}};
}

Json lock_json(const LockCounts& c) {
    return {{"locked", c.total}, {"locked_below_omega0", c.below}, {"locked_above_omega0", c.above}};
}

void write_single_run(BundleWriter& bundle, const std::string& prefix, const SingleRunSetup& setup,
                      std::size_t stride, RunOutcome& outcome) {
    bundle.write(prefix + "trajectory.csv", [&](std::ostream& os) {
        TrajectoryCsvWriter writer(os, setup.sim.input.omega_i, stride);
        outcome = evaluate_run(setup.params, setup.sim, setup.window,
                               [&writer](const Sample& s) { writer.push(s); });
    });
}

}  // namespace

void GridAxis::validate(std::string_view name) const {
    if (count < 1) {
        throw ConfigError(std::string(name) + ": count must be at least 1");
    }
    if (!std::isfinite(low) || !std::isfinite(high) || high < low) {
        throw ConfigError(std::string(name) + ": range must be finite with low <= high");
    }
}

std::vector<double> GridAxis::values() const {
    std::vector<double> v(count);
    if (count == 1) {
        v[0] = low;
        return v;
    }
    const double step = (high - low) / static_cast<double>(count - 1);
    for (std::size_t k = 0; k < count; ++k) {
        v[k] = k + 1 == count ? high : low + step * static_cast<double>(k);
    }
    return v;
}

RunOutcome evaluate_run(const PllParams& params, const SimConfig& sim, TimeWindow window,
                        const SampleSink& observer) {
    StreamingMetrics metrics(sim.input.omega_i, window);
    RunOutcome out;
    std::size_t n = 0;
    double error_sum = 0.0;
    double abs_vc_sum = 0.0;
    double vc_min = std::numeric_limits<double>::infinity();
    double vc_max = -std::numeric_limits<double>::infinity();
    try {
        integrate(params, sim, [&](const Sample& s) {
            if (observer) {
                observer(s);
            }
            metrics.push(s);
            if (in_window(s.t, window)) {
                ++n;
                error_sum += sim.input.omega_i - s.omega_inst;
                abs_vc_sum += std::abs(s.v_c);
                vc_min = std::min(vc_min, s.v_c);
                vc_max = std::max(vc_max, s.v_c);
            }
        });
        out.metrics = metrics.finish();
    } catch (const DivergenceError& e) {
        out.diverged = true;
        out.diagnostic = e.what();
    } catch (const DegenerateStateError& e) {
        out.diverged = true;
        out.diagnostic = e.what();
    }
    if (out.diverged) {
        out.metrics = MetricsRecord::diverged();
        return out;
    }
    out.mean_frequency_error = error_sum / static_cast<double>(n);
    out.v_c_mean_abs = abs_vc_sum / static_cast<double>(n);
    out.v_c_min = vc_min;
    out.v_c_max = vc_max;
    return out;
}

void SweepSpec::validate() const {
    omega_i_range.validate("sweep.omega_i_range");
    gain_range.validate("sweep.gain_range");
    PllParams probe = fixed;
    probe.kv = probe.kd = gain_range.low;
    probe.validate();
    if (!(omega_i_range.low > 0.0)) {
        throw ConfigError("sweep.omega_i_range: frequencies must be positive");
    }
    sim.validate();
    noise.validate();
    require_fraction(window_start_fraction, "sweep");
}

CellSetup sweep_cell_setup(const SweepSpec& spec, std::size_t omega_index, std::size_t gain_index) {
    const auto omegas = spec.omega_i_range.values();
    const auto gains = spec.gain_range.values();
    if (omega_index >= omegas.size() || gain_index >= gains.size()) {
        throw RangeError("sweep: cell index outside the grid");
    }
    const std::uint64_t cell = omega_index * gains.size() + gain_index;
    CellSetup c{spec.fixed, spec.sim, TimeWindow::tail(spec.sim.t_final, spec.window_start_fraction)};
    c.params.kv = c.params.kd = gains[gain_index];
    c.sim.input.omega_i = omegas[omega_index];
    c.sim.init.seed = derive_seed(spec.master_seed, cell, SeedPurpose::init);
    c.sim.noise = NoiseSpec{spec.noise.input_noise_variance, spec.noise.omega0_noise_variance,
                            derive_seed(spec.master_seed, cell, SeedPurpose::noise)};
    c.sim.initial_state.reset();
    return c;
}

SweepResult run_sweep(const SweepSpec& spec, std::size_t workers) {
    spec.validate();
    SweepResult result;
    result.omega_i_axis = spec.omega_i_range.values();
    result.gain_axis = spec.gain_range.values();
    result.master_seed = spec.master_seed;
    result.cells.resize(spec.cell_count());
    const std::size_t gains = result.gain_axis.size();
    detail::parallel_for(result.cells.size(), workers, [&](std::size_t index) {
        const auto start = std::chrono::steady_clock::now();
        const auto setup = sweep_cell_setup(spec, index / gains, index % gains);
        const auto outcome = evaluate_run(setup.params, setup.sim, setup.window);
        result.cells[index] = SweepCell{setup.sim.input.omega_i, setup.params.kv, outcome.metrics, outcome.diverged,
                                        elapsed_since(start)};
    });
    return result;
}

LockCounts lock_counts(const SweepResult& result, double omega0) {
    LockCounts c;
    for (const auto& cell : result.cells) {
        if (!cell.metrics.freq_locked) {
            continue;
        }
        ++c.total;
        if (cell.omega_i < omega0) {
            ++c.below;
        } else if (cell.omega_i > omega0) {
            ++c.above;
        }
    }
    return c;
}

void McSpec::validate() const {
    if (runs < 1) {
        throw ConfigError("mc: runs must be at least 1");
    }
    params.validate();
    sim.validate();
    noise.validate();
    require_fraction(window_start_fraction, "mc");
    for (double t : f_thresholds) {
        if (!(t > 0.0) || !std::isfinite(t)) {
            throw ConfigError("mc: f_thresholds must be positive and finite");
        }
    }
}

Quantiles quantiles(std::vector<double> values) {
    if (values.empty()) {
        throw RangeError("quantiles: no values");
    }
    std::sort(values.begin(), values.end());
    const auto at = [&values](double p) {
        const double h = p * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        if (lo + 1 >= values.size()) {
            return values.back();
        }
        return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
    };
    return {values.front(), at(0.25), at(0.5), at(0.75), values.back()};
}

SimConfig mc_run_config(const McSpec& spec, std::size_t run) {
    SimConfig sim = spec.sim;
    sim.init.seed = derive_seed(spec.master_seed, run, SeedPurpose::init);
    sim.noise = NoiseSpec{spec.noise.input_noise_variance, spec.noise.omega0_noise_variance,
                          derive_seed(spec.master_seed, run, SeedPurpose::noise)};
    sim.initial_state.reset();
    return sim;
}

McSummary summarize(const std::vector<McRun>& runs, const std::vector<double>& thresholds) {
    McSummary s;
    std::vector<double> f, m, sd;
    for (const auto& r : runs) {
        if (r.diverged) {
            ++s.diverged;
            continue;
        }
        f.push_back(r.metrics.f);
        m.push_back(r.metrics.m);
        sd.push_back(r.metrics.s);
    }
    if (!f.empty()) {
        s.f = quantiles(f);
        s.m = quantiles(m);
        s.s = quantiles(sd);
    }
    for (double threshold : thresholds) {
        const auto below = std::count_if(f.begin(), f.end(), [threshold](double v) { return v < threshold; });
        s.fraction_f_below.emplace_back(
            threshold, runs.empty() ? 0.0 : static_cast<double>(below) / static_cast<double>(runs.size()));
    }
    return s;
}

McResult run_monte_carlo(const McSpec& spec, std::size_t workers) {
    spec.validate();
    McResult result;
    result.master_seed = spec.master_seed;
    result.runs.resize(spec.runs);
    const TimeWindow window = TimeWindow::tail(spec.sim.t_final, spec.window_start_fraction);
    // Index runs are the noisy runs; index spec.runs is the noise-free reference.
    detail::parallel_for(spec.runs + 1, workers, [&](std::size_t index) {
        SimConfig sim = mc_run_config(spec, index == spec.runs ? 0 : index);
        if (index == spec.runs) {
            sim.noise.input_noise_variance = 0.0;
            sim.noise.omega0_noise_variance = 0.0;
        }
        const auto outcome = evaluate_run(spec.params, sim, window);
        McRun run{index == spec.runs ? 0 : index, outcome.metrics, outcome.diverged};
        if (index == spec.runs) {
            result.reference = run;
        } else {
            result.runs[index] = run;
        }
    });
    result.summary = summarize(result.runs, spec.f_thresholds);
    return result;
}

std::string_view preset_name(Preset preset) noexcept {
    switch (preset) {
        case Preset::example1: return "example1";
        case Preset::example2: return "example2";
        case Preset::example3: return "example3";
        case Preset::noise_mc_omega0: return "noise_mc_omega0";
        case Preset::noise_mc_input: return "noise_mc_input";
        case Preset::noise_sweep: return "noise_sweep";
    }
    return "unknown";
}

std::vector<Preset> all_presets() {
    return {Preset::example1,        Preset::example2,       Preset::example3,
            Preset::noise_mc_omega0, Preset::noise_mc_input, Preset::noise_sweep};
}

Preset preset_from_name(std::string_view name) {
    for (Preset p : all_presets()) {
        if (preset_name(p) == name) {
            return p;
        }
    }
    std::ostringstream os;
    os << "unknown preset '" << name << "'; expected one of:";
    for (Preset p : all_presets()) {
        os << ' ' << preset_name(p);
    }
    throw ConfigError(os.str());
}

SingleRunSetup example1_setup(double scale, std::uint64_t seed) {
    SingleRunSetup s;
    s.params = PllParams{.omega0 = 1.0, .kv = 0.7, .kd = 0.7, .ki = 0.0};
    s.sim.dt = 0.01;
    s.sim.t_final = scaled_horizon(scale);
    s.sim.input = {1.0, 1.02};
    s.sim.init = {0.01, derive_seed(seed, 0, SeedPurpose::init)};
    s.sim.noise = {0.0, 0.0, derive_seed(seed, 0, SeedPurpose::noise)};
    s.window = TimeWindow::tail(s.sim.t_final);
    return s;
}

std::pair<SingleRunSetup, SingleRunSetup> example2_setup(double scale, std::uint64_t seed) {
    SingleRunSetup proportional;
    proportional.params = PllParams{.omega0 = 1.002, .kv = 0.8, .kd = 0.8, .ki = 0.0};
    proportional.sim.dt = std::numbers::pi / 300.0;
    proportional.sim.t_final = scaled_horizon(scale);
    proportional.sim.input = {1.0, 1.001};
    proportional.sim.init = {0.01, derive_seed(seed, 0, SeedPurpose::init)};
    proportional.sim.noise = {0.0, 0.0, derive_seed(seed, 0, SeedPurpose::noise)};
    proportional.window = TimeWindow::tail(proportional.sim.t_final);
    SingleRunSetup integral = proportional;
    integral.params.ki = 0.5;
    return {proportional, integral};
}

SweepSpec example3_spec(double scale, std::uint64_t seed) {
    SweepSpec s;
    s.sim.t_final = scaled_horizon(scale);
    s.master_seed = seed;
    return s;
}

McSpec noise_mc_spec(NoiseChannel channel, double scale, std::uint64_t seed) {
    McSpec s;
    s.sim.t_final = scaled_horizon(scale);
    s.master_seed = seed;
    s.noise = channel == NoiseChannel::omega0 ? NoiseSpec{0.0, kStudyNoiseVariance, 0}
                                              : NoiseSpec{kStudyNoiseVariance, 0.0, 0};
    return s;
}

SweepSpec noise_sweep_spec(double scale, std::uint64_t seed) {
    SweepSpec s = example3_spec(scale, seed);
    s.noise = {kStudyNoiseVariance, kStudyNoiseVariance, 0};
    return s;
}

PresetReport run_preset(Preset preset, const PresetOptions& options) {
    if (options.trajectory_stride < 1) {
        throw ConfigError("preset: trajectory_stride must be at least 1");
    }
    const auto start = std::chrono::steady_clock::now();
    BundleWriter bundle(options.out_dir);
    Json config = {{"preset", std::string(preset_name(preset))},
                   {"seed", options.seed},
                   {"scale", options.scale},
                   {"trajectory_stride", options.trajectory_stride}};
    Json results;
    Json timing = Json::object();

    switch (preset) {
        case Preset::example1: {
            const auto setup = example1_setup(options.scale, options.seed);
            config["run"] = single_run_json(setup);
            RunOutcome outcome;
            write_single_run(bundle, "", setup, options.trajectory_stride, outcome);
            bundle.write("bode.csv", [&setup](std::ostream& os) {
                write_bode_csv(os, bode(setup.params.filter, 0.01, 100.0, 200));
            });
            results = outcome_json(outcome);
            break;
        }
        case Preset::example2: {
            const auto [proportional, integral] = example2_setup(options.scale, options.seed);
            config["proportional"] = single_run_json(proportional);
            config["integral"] = single_run_json(integral);
            RunOutcome p, i;
            write_single_run(bundle, "proportional/", proportional, options.trajectory_stride, p);
            write_single_run(bundle, "integral/", integral, options.trajectory_stride, i);
            results = {{"proportional", outcome_json(p)}, {"integral", outcome_json(i)}};
            break;
        }
        case Preset::example3:
        case Preset::noise_sweep: {
            const auto spec = preset == Preset::example3 ? example3_spec(options.scale, options.seed)
                                                         : noise_sweep_spec(options.scale, options.seed);
            const auto write_sweep = [&](const std::string& prefix, const SweepSpec& s) {
                const auto result = run_sweep(s, options.workers);
                bundle.write(prefix + "sweep.csv", [&result](std::ostream& os) { write_sweep_csv(os, result); });
                Json cells = Json::array();
                for (const auto& c : result.cells) {
                    cells.push_back(c.wall_seconds);
                }
                timing[prefix.empty() ? "cells" : prefix + "cells"] = cells;
                Json r = lock_json(lock_counts(result, s.fixed.omega0));
                r["cells"] = result.cells.size();
                r["diverged"] = std::count_if(result.cells.begin(), result.cells.end(),
                                              [](const SweepCell& c) { return c.diverged; });
                return r;
            };
            if (preset == Preset::example3) {
                config["sweep"] = to_json(spec);
                results = write_sweep("", spec);
            } else {
                SweepSpec clean = spec;
                clean.noise = NoiseSpec{};
                config["noisy"] = to_json(spec);
                config["noise_free"] = to_json(clean);
                results = {{"noisy", write_sweep("noisy/", spec)}, {"noise_free", write_sweep("noise_free/", clean)}};
            }
            break;
        }
        case Preset::noise_mc_omega0:
        case Preset::noise_mc_input: {
            const auto spec = noise_mc_spec(
                preset == Preset::noise_mc_omega0 ? NoiseChannel::omega0 : NoiseChannel::input, options.scale,
                options.seed);
            config["mc"] = to_json(spec);
            const auto result = run_monte_carlo(spec, options.workers);
            bundle.write("mc.csv", [&result](std::ostream& os) { write_mc_csv(os, result.runs); });
            bundle.write("mc_ref.csv", [&result](std::ostream& os) { write_mc_ref_csv(os, result.reference); });
            results = {{"summary", summary_json(result.summary)}, {"reference", to_json(result.reference.metrics)}};
            break;
        }
    }

    std::vector<std::string> files = bundle.files();
    files.push_back("timing.json");
    bundle.write_json("manifest.json", make_manifest("preset", config, files, results));
    timing["total_seconds"] = elapsed_since(start);
    bundle.write_json("timing.json", timing);
    bundle.commit();
    return {bundle.files(), results};
}

}  // namespace pllsim
