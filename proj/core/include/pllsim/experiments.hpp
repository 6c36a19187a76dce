#pragma once

#include "pllsim/analysis.hpp"
#include "pllsim/integrator.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace pllsim {

namespace detail {
inline SimConfig sim_template(double dt, double t_final, double omega_i) {
    SimConfig s;
    s.dt = dt;
    s.t_final = t_final;
    s.input.omega_i = omega_i;
    return s;
}
}  // namespace detail

/// Linearly spaced axis with `count` points from low to high inclusive.
struct GridAxis {
    double low = 0.0;
    double high = 0.0;
    std::size_t count = 1;

    /// Throws ConfigError on count 0, non-finite ends or high < low.
    void validate(std::string_view name) const;
    /// A single-point axis sits at `low`.
    [[nodiscard]] std::vector<double> values() const;

    friend bool operator==(const GridAxis&, const GridAxis&) = default;
};

/// Outcome of one streamed run: metrics over the window plus a few window
/// statistics that the presets report.
struct RunOutcome {
    MetricsRecord metrics;
    bool diverged = false;
    std::string diagnostic;  ///< empty unless diverged
    double mean_frequency_error = 0.0;  ///< mean of omega_i - omega_inst over the window
    double v_c_min = 0.0;
    double v_c_max = 0.0;
    double v_c_mean_abs = 0.0;
};

/**
 * Integrates one run and evaluates it over `window` without storing the
 * trajectory. A divergence or a degenerate oscillator state is caught and
 * reported through `diverged` with MetricsRecord::diverged(). Configuration
 * errors propagate. `observer`, when set, sees every recorded sample.
 */
[[nodiscard]] RunOutcome evaluate_run(const PllParams& params, const SimConfig& sim, TimeWindow window,
                                      const SampleSink& observer = {});

struct SweepSpec {
    GridAxis omega_i_range{0.2, 1.8, 26};
    GridAxis gain_range{0.1, 3.0, 20};  ///< Kd = Kv
    /// omega0, ki and filter; kv and kd are overwritten per cell.
    PllParams fixed{.omega0 = 1.0, .kv = 0.0, .kd = 0.0, .ki = 0.22};
    /// dt, t_final, input amplitude and initial-condition variance. omega_i,
    /// noise and seeds are set per cell.
    SimConfig sim = detail::sim_template(3.141592653589793 / 300.0, 2000.0, 1.0);
    /// Variances only; the seed is derived per cell.
    NoiseSpec noise;
    std::uint64_t master_seed = 0;
    /// The evaluation window starts at this fraction of t_final.
    double window_start_fraction = 0.5;

    void validate() const;
    [[nodiscard]] std::size_t cell_count() const noexcept { return omega_i_range.count * gain_range.count; }
};

struct SweepCell {
    double omega_i = 0.0;
    double gain = 0.0;
    MetricsRecord metrics;
    bool diverged = false;
    double wall_seconds = 0.0;
};

/// Cells ordered with omega_i as the outer index: cell(i, j) = cells[i * gains + j].
struct SweepResult {
    std::vector<double> omega_i_axis;
    std::vector<double> gain_axis;
    std::vector<SweepCell> cells;
    std::uint64_t master_seed = 0;

    [[nodiscard]] const SweepCell& at(std::size_t omega_index, std::size_t gain_index) const {
        return cells.at(omega_index * gain_axis.size() + gain_index);
    }
};

/// Parameters and configuration of one sweep cell, seeds included.
struct CellSetup {
    PllParams params;
    SimConfig sim;
    TimeWindow window;
};

[[nodiscard]] CellSetup sweep_cell_setup(const SweepSpec& spec, std::size_t omega_index, std::size_t gain_index);

/// workers = 0 uses the hardware concurrency. Results do not depend on `workers`.
[[nodiscard]] SweepResult run_sweep(const SweepSpec& spec, std::size_t workers = 1);

struct LockCounts {
    std::size_t total = 0;
    std::size_t below = 0;  ///< locked cells with omega_i < omega0
    std::size_t above = 0;  ///< locked cells with omega_i > omega0
};

[[nodiscard]] LockCounts lock_counts(const SweepResult& result, double omega0);

struct McSpec {
    std::size_t runs = 200;
    PllParams params{.omega0 = 1.0, .kv = 0.8, .kd = 0.8, .ki = 0.0};
    /// Noise and seeds are set per run.
    SimConfig sim = detail::sim_template(0.01, 2000.0, 1.02);
    /// Variances only; the seed is derived per run.
    NoiseSpec noise{.omega0_noise_variance = 0.01};
    std::uint64_t master_seed = 0;
    double window_start_fraction = 0.5;
    std::vector<double> f_thresholds{1e-3, 2e-3, 1e-2, 2.5e-2, 5e-2};

    void validate() const;
};

/// Quantiles by linear interpolation between order statistics (type 7).
struct Quantiles {
    double min = 0.0;
    double q25 = 0.0;
    double median = 0.0;
    double q75 = 0.0;
    double max = 0.0;

    [[nodiscard]] double iqr() const noexcept { return q75 - q25; }
};

/// Throws RangeError on an empty input.
[[nodiscard]] Quantiles quantiles(std::vector<double> values);

struct McRun {
    std::size_t run = 0;
    MetricsRecord metrics;
    bool diverged = false;
};

struct McSummary {
    std::size_t diverged = 0;
    /// Over the runs that did not diverge; unset when every run diverged.
    std::optional<Quantiles> f, m, s;
    /// (threshold, fraction of all runs with f below it). Diverged runs count as above.
    std::vector<std::pair<double, double>> fraction_f_below;
};

struct McResult {
    std::vector<McRun> runs;
    /// Noise-free run from run 0's initial condition.
    McRun reference;
    McSummary summary;
    std::uint64_t master_seed = 0;
};

[[nodiscard]] SimConfig mc_run_config(const McSpec& spec, std::size_t run);

[[nodiscard]] McResult run_monte_carlo(const McSpec& spec, std::size_t workers = 1);

[[nodiscard]] McSummary summarize(const std::vector<McRun>& runs, const std::vector<double>& thresholds);

// Named presets with fixed parameter values. `scale` multiplies the full
// horizon t_f = 10000; the default 0.2 gives t_f = 2000.

enum class Preset { example1, example2, example3, noise_mc_omega0, noise_mc_input, noise_sweep };

inline constexpr double kFullHorizon = 10000.0;
inline constexpr double kDefaultScale = 0.2;

[[nodiscard]] std::string_view preset_name(Preset preset) noexcept;
/// Throws ConfigError for an unknown name.
[[nodiscard]] Preset preset_from_name(std::string_view name);
[[nodiscard]] std::vector<Preset> all_presets();

struct SingleRunSetup {
    PllParams params;
    SimConfig sim;
    TimeWindow window;
};

[[nodiscard]] SingleRunSetup example1_setup(double scale = kDefaultScale, std::uint64_t seed = 0);
/// Kd = Kv = 0.8, omega_i = 1.001, omega0 = 1.002; Ki = 0 in the first run and
/// 0.5 in the second, both from the same initial condition.
[[nodiscard]] std::pair<SingleRunSetup, SingleRunSetup> example2_setup(double scale = kDefaultScale,
                                                                       std::uint64_t seed = 0);
[[nodiscard]] SweepSpec example3_spec(double scale = kDefaultScale, std::uint64_t seed = 0);
[[nodiscard]] McSpec noise_mc_spec(NoiseChannel channel, double scale = kDefaultScale, std::uint64_t seed = 0);
/// The Example 3 grid with variance 0.01 on both channels.
[[nodiscard]] SweepSpec noise_sweep_spec(double scale = kDefaultScale, std::uint64_t seed = 0);

struct PresetOptions {
    std::filesystem::path out_dir;
    std::uint64_t seed = 0;
    double scale = kDefaultScale;
    std::size_t workers = 1;
    /// Every n-th integration step goes to trajectory.csv.
    std::size_t trajectory_stride = 10;
};

struct PresetReport {
    std::vector<std::string> files;  ///< relative to out_dir
    nlohmann::json results;
};

/// Runs a preset and writes its bundle and manifest.json into options.out_dir,
/// atomically. Throws IoError with the offending path on I/O failure.
PresetReport run_preset(Preset preset, const PresetOptions& options);

}  // namespace pllsim
