#include "cli.hpp"

#include "pllsim/config.hpp"
#include "pllsim/errors.hpp"
#include "pllsim/experiments.hpp"
#include "pllsim/persist.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace pllsim::cli {

namespace {

namespace fs = std::filesystem;

// A named flag that writes its value into one or more config paths.
struct ParamFlag {
    std::string name;
    std::vector<std::string> paths;
    std::string help;
};

struct Subcommand {
    CLI::App* app = nullptr;
    std::string config_path;
    std::vector<std::string> assignments;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<double> scale;
    std::size_t workers = 1;
    std::vector<ParamFlag> flags;
    std::map<std::string, std::string> flag_values;
    std::vector<CLI::Option*> flag_options;
};

fs::path resolve_out_dir(const std::string& requested, const std::string& name) {
    if (!requested.empty()) {
        return requested;
    }
    if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') {
        return fs::path(env) / name;
    }
    return fs::path("pllsim-out") / name;
}

void add_common(Subcommand& sub, bool with_workers) {
    sub.app->add_option("--config", sub.config_path, "JSON configuration file or a previous run manifest");
    sub.app->add_option("--set", sub.assignments, "Override a configuration entry, path=value (repeatable)");
    sub.app->add_option("--out", sub.out,
                        std::string("Output directory (default: $") + kOutDirEnv + "/<command> or pllsim-out/<command>)");
    sub.app->add_option("--seed", sub.seed, "Master seed");
    sub.app->add_option("--scale", sub.scale, "Multiply t_final by this factor");
    if (with_workers) {
        sub.app->add_option("--workers", sub.workers, "Worker threads, 0 for all cores")->capture_default_str();
    }
}

void add_param_flags(Subcommand& sub, std::vector<ParamFlag> flags) {
    sub.flags = std::move(flags);
    for (const auto& f : sub.flags) {
        sub.flag_options.push_back(sub.app->add_option("--" + f.name, sub.flag_values[f.name], f.help));
    }
}

// Defaults, then the config file, then --set assignments, then named flags.
Json resolve_document(Subcommand& sub, const Json& schema,
                      const std::function<Json(const Json&)>& normalize_file) {
    Json doc = schema;
    if (!sub.config_path.empty()) {
        doc = normalize_file(load_config_file(sub.config_path));
    }
    for (const auto& a : sub.assignments) {
        apply_override(doc, schema, a);
    }
    for (std::size_t k = 0; k < sub.flags.size(); ++k) {
        if (sub.flag_options[k]->count() == 0) {
            continue;
        }
        const auto& text = sub.flag_values[sub.flags[k].name];
        Json value = Json::parse(text, nullptr, false);
        if (value.is_discarded()) {
            value = text;
        }
        for (const auto& path : sub.flags[k].paths) {
            try {
                set_checked(doc, schema, path, value);
            } catch (const ConfigError& e) {
                throw ConfigError("--" + sub.flags[k].name + ": " + e.what());
            }
        }
    }
    return doc;
}

void scale_horizon(Json& doc, const std::optional<double>& scale) {
    if (!scale) {
        return;
    }
    if (!(*scale > 0.0)) {
        throw ConfigError("--scale must be positive");
    }
    doc["sim"]["t_final"] = doc["sim"]["t_final"].get<double>() * *scale;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void finish_bundle(BundleWriter& bundle, const std::string& command, const Json& config, const Json& results,
                   std::chrono::steady_clock::time_point start, std::ostream& out) {
    auto files = bundle.files();
    files.push_back("timing.json");
    bundle.write_json("manifest.json", make_manifest(command, config, files, results));
    bundle.write_json("timing.json", Json{{"total_seconds", seconds_since(start)}});
    bundle.commit();
    out << "wrote " << bundle.out_dir().string() << '\n';
}

// simulate

Json simulate_schema() {
    return {{"params", to_json(PllParams{})}, {"sim", to_json(SimConfig{})}, {"window_start_fraction", 0.5}};
}

int run_simulate(Subcommand& sub, std::ostream& out) {
    const Json schema = simulate_schema();
    Json doc = resolve_document(sub, schema, [](const Json& file) {
        if (!file.is_object()) {
            throw ConfigError("config: document must be an object");
        }
        for (auto it = file.begin(); it != file.end(); ++it) {
            if (it.key() != "params" && it.key() != "sim" && it.key() != "window_start_fraction") {
                throw ConfigError("config: unknown key '" + it.key() + "'");
            }
        }
        Json doc = simulate_schema();
        const PllParams params = file.contains("params") ? from_json<PllParams>(file["params"]) : PllParams{};
        doc["params"] = to_json(params);
        if (file.contains("sim")) {
            doc["sim"] = to_json(sim_config_from_json(file["sim"], params));
        }
        if (file.contains("window_start_fraction")) {
            if (!file["window_start_fraction"].is_number()) {
                throw ConfigError("config: 'window_start_fraction' must be a number");
            }
            doc["window_start_fraction"] = file["window_start_fraction"];
        }
        return doc;
    });
    if (sub.seed) {
        doc["sim"]["init"]["seed"] = derive_seed(*sub.seed, 0, SeedPurpose::init);
        doc["sim"]["noise"]["seed"] = derive_seed(*sub.seed, 0, SeedPurpose::noise);
    }
    scale_horizon(doc, sub.scale);

    const PllParams params = from_json<PllParams>(doc["params"]);
    SimConfig sim = sim_config_from_json(doc["sim"], params);
    params.validate();
    sim.validate();
    const double fraction = doc["window_start_fraction"].get<double>();
    if (!(fraction >= 0.0 && fraction < 1.0)) {
        throw ConfigError("window_start_fraction must lie in [0, 1)");
    }
    const TimeWindow window = TimeWindow::tail(sim.t_final, fraction);
    const std::size_t stride = sim.record_stride;
    sim.record_stride = 1;

    const auto start = std::chrono::steady_clock::now();
    BundleWriter bundle(resolve_out_dir(sub.out, "simulate"));
    RunOutcome outcome;
    bundle.write("trajectory.csv", [&](std::ostream& os) {
        TrajectoryCsvWriter writer(os, sim.input.omega_i, stride);
        outcome = evaluate_run(params, sim, window, [&writer](const Sample& s) { writer.push(s); });
    });
    Json results = {{"metrics", to_json(outcome.metrics)}, {"diverged", outcome.diverged}};
    if (outcome.diverged) {
        results["diagnostic"] = outcome.diagnostic;
    } else {
        results["mean_frequency_error"] = outcome.mean_frequency_error;
        results["v_c_peak_to_peak"] = outcome.v_c_max - outcome.v_c_min;
        results["v_c_mean_abs"] = outcome.v_c_mean_abs;
    }
    finish_bundle(bundle, "simulate", doc, results, start, out);
    out << "f = " << format_real(outcome.metrics.f) << ", e_max = " << format_real(outcome.metrics.e_max)
        << (outcome.diverged ? " (diverged)" : "") << '\n';
    return 0;
}

// bode

Json bode_schema() {
    return {{"filter", to_json(FilterSpec::loop_filter_default())},
            {"omega_min", 0.01},
            {"omega_max", 100.0},
            {"points", 200}};
}

int run_bode(Subcommand& sub, std::ostream& out) {
    const Json schema = bode_schema();
    Json doc = resolve_document(sub, schema, [&schema](const Json& file) {
        if (!file.is_object()) {
            throw ConfigError("config: document must be an object");
        }
        Json doc = schema;
        for (auto it = file.begin(); it != file.end(); ++it) {
            if (!schema.contains(it.key())) {
                throw ConfigError("config: unknown key '" + it.key() + "'");
            }
            if (it.key() == "filter") {
                doc["filter"] = to_json(from_json<FilterSpec>(it.value()));
            } else {
                set_checked(doc, schema, it.key(), it.value());
            }
        }
        return doc;
    });
    const FilterSpec filter = from_json<FilterSpec>(doc["filter"]);
    const auto points = bode(filter, doc["omega_min"].get<double>(), doc["omega_max"].get<double>(),
                             doc["points"].get<std::size_t>());

    const auto start = std::chrono::steady_clock::now();
    BundleWriter bundle(resolve_out_dir(sub.out, "bode"));
    bundle.write("bode.csv", [&points](std::ostream& os) { write_bode_csv(os, points); });
    finish_bundle(bundle, "bode", doc, Json{{"points", points.size()}}, start, out);
    return 0;
}

// sweep

int run_sweep_command(Subcommand& sub, std::ostream& out) {
    const Json schema = to_json(SweepSpec{});
    Json doc = resolve_document(sub, schema, [](const Json& file) { return to_json(from_json<SweepSpec>(file)); });
    if (sub.seed) {
        doc["master_seed"] = *sub.seed;
    }
    scale_horizon(doc, sub.scale);
    const SweepSpec spec = from_json<SweepSpec>(doc);
    spec.validate();

    const auto start = std::chrono::steady_clock::now();
    BundleWriter bundle(resolve_out_dir(sub.out, "sweep"));
    const SweepResult result = run_sweep(spec, sub.workers);
    bundle.write("sweep.csv", [&result](std::ostream& os) { write_sweep_csv(os, result); });
    const auto counts = lock_counts(result, spec.fixed.omega0);
    const auto diverged = std::count_if(result.cells.begin(), result.cells.end(),
                                        [](const SweepCell& c) { return c.diverged; });
    const Json results = {{"cells", result.cells.size()},
                          {"locked", counts.total},
                          {"locked_below_omega0", counts.below},
                          {"locked_above_omega0", counts.above},
                          {"diverged", diverged}};
    finish_bundle(bundle, "sweep", doc, results, start, out);
    out << counts.total << " of " << result.cells.size() << " cells frequency-locked\n";
    return 0;
}

// mc

int run_mc_command(Subcommand& sub, std::ostream& out) {
    const Json schema = to_json(McSpec{});
    Json doc = resolve_document(sub, schema, [](const Json& file) { return to_json(from_json<McSpec>(file)); });
    if (sub.seed) {
        doc["master_seed"] = *sub.seed;
    }
    scale_horizon(doc, sub.scale);
    const McSpec spec = from_json<McSpec>(doc);
    spec.validate();

    const auto start = std::chrono::steady_clock::now();
    BundleWriter bundle(resolve_out_dir(sub.out, "mc"));
    const McResult result = run_monte_carlo(spec, sub.workers);
    bundle.write("mc.csv", [&result](std::ostream& os) { write_mc_csv(os, result.runs); });
    bundle.write("mc_ref.csv", [&result](std::ostream& os) { write_mc_ref_csv(os, result.reference); });
    Json below = Json::array();
    for (const auto& [threshold, fraction] : result.summary.fraction_f_below) {
        below.push_back({{"threshold", threshold}, {"fraction", fraction}});
    }
    Json results = {{"runs", result.runs.size()},
                    {"diverged", result.summary.diverged},
                    {"fraction_f_below", below},
                    {"reference", to_json(result.reference.metrics)}};
    if (result.summary.f) {
        const auto& q = *result.summary.f;
        results["f_quantiles"] = {{"min", q.min}, {"q25", q.q25}, {"median", q.median}, {"q75", q.q75}, {"max", q.max}};
    }
    finish_bundle(bundle, "mc", doc, results, start, out);
    return 0;
}

// preset

int run_preset_command(Subcommand& sub, const std::string& name, std::size_t trajectory_stride,
                       std::ostream& out) {
    const Preset preset = preset_from_name(name);
    PresetOptions options;
    options.out_dir = resolve_out_dir(sub.out, name);
    options.seed = sub.seed.value_or(0);
    options.scale = sub.scale.value_or(kDefaultScale);
    options.workers = sub.workers;
    options.trajectory_stride = trajectory_stride;
    const auto report = run_preset(preset, options);
    out << "wrote " << options.out_dir.string() << " (" << report.files.size() << " files)\n";
    return 0;
}

std::vector<ParamFlag> simulate_flags() {
    return {{"dt", {"sim.dt"}, "Integration step [s]"},
            {"t-final", {"sim.t_final"}, "Horizon [s]"},
            {"stride", {"sim.record_stride"}, "Write every n-th step to trajectory.csv"},
            {"omega-i", {"sim.input.omega_i"}, "Input frequency [rad/s]"},
            {"amplitude", {"sim.input.amplitude"}, "Input amplitude"},
            {"omega0", {"params.omega0"}, "VCO central frequency [rad/s]"},
            {"gain", {"params.kv", "params.kd"}, "Sets Kd = Kv"},
            {"kv", {"params.kv"}, "VCO gain"},
            {"kd", {"params.kd"}, "Phase-detector gain"},
            {"ki", {"params.ki"}, "VCO integral gain"},
            {"input-noise-var", {"sim.noise.input_noise_variance"}, "Input noise variance"},
            {"omega0-noise-var", {"sim.noise.omega0_noise_variance"}, "omega0 noise variance"},
            {"init-var", {"sim.init.variance"}, "Initial-condition variance"},
            {"window-start", {"window_start_fraction"}, "Evaluation window start as a fraction of t_final"}};
}

std::vector<ParamFlag> sweep_flags() {
    return {{"omega-i-min", {"omega_i_range.low"}, "Lowest input frequency"},
            {"omega-i-max", {"omega_i_range.high"}, "Highest input frequency"},
            {"omega-i-points", {"omega_i_range.count"}, "Input-frequency grid points"},
            {"gain-min", {"gain_range.low"}, "Lowest Kd = Kv"},
            {"gain-max", {"gain_range.high"}, "Highest Kd = Kv"},
            {"gain-points", {"gain_range.count"}, "Gain grid points"},
            {"omega0", {"fixed.omega0"}, "VCO central frequency"},
            {"ki", {"fixed.ki"}, "VCO integral gain"},
            {"dt", {"sim.dt"}, "Integration step"},
            {"t-final", {"sim.t_final"}, "Horizon"},
            {"amplitude", {"sim.input.amplitude"}, "Input amplitude"},
            {"init-var", {"sim.init.variance"}, "Initial-condition variance"},
            {"input-noise-var", {"noise.input_noise_variance"}, "Input noise variance"},
            {"omega0-noise-var", {"noise.omega0_noise_variance"}, "omega0 noise variance"},
            {"window-start", {"window_start_fraction"}, "Evaluation window start fraction"}};
}

std::vector<ParamFlag> mc_flags() {
    return {{"runs", {"runs"}, "Number of Monte-Carlo runs"},
            {"omega0", {"params.omega0"}, "VCO central frequency"},
            {"gain", {"params.kv", "params.kd"}, "Sets Kd = Kv"},
            {"kv", {"params.kv"}, "VCO gain"},
            {"kd", {"params.kd"}, "Phase-detector gain"},
            {"ki", {"params.ki"}, "VCO integral gain"},
            {"dt", {"sim.dt"}, "Integration step"},
            {"t-final", {"sim.t_final"}, "Horizon"},
            {"omega-i", {"sim.input.omega_i"}, "Input frequency"},
            {"amplitude", {"sim.input.amplitude"}, "Input amplitude"},
            {"init-var", {"sim.init.variance"}, "Initial-condition variance"},
            {"input-noise-var", {"noise.input_noise_variance"}, "Input noise variance"},
            {"omega0-noise-var", {"noise.omega0_noise_variance"}, "omega0 noise variance"},
            {"window-start", {"window_start_fraction"}, "Evaluation window start fraction"}};
}

std::vector<ParamFlag> bode_flags() {
    return {{"omega-min", {"omega_min"}, "Lowest frequency [rad/s]"},
            {"omega-max", {"omega_max"}, "Highest frequency [rad/s]"},
            {"points", {"points"}, "Log-spaced points"},
            {"denom", {"filter.denom_coeffs"}, "Monic denominator a_0..a_{n-1} as a JSON array"},
            {"num", {"filter.num_coeffs"}, "Numerator b_0..b_m as a JSON array"}};
}

}  // namespace

int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Simulation lab for a third-order PLL state-space model", "pllsim"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(version()));

    Subcommand simulate, bode_cmd, sweep, mc, preset;
    simulate.app = app.add_subcommand("simulate", "Integrate one run and write trajectory.csv");
    bode_cmd.app = app.add_subcommand("bode", "Write the loop filter's frequency response to bode.csv");
    sweep.app = app.add_subcommand("sweep", "Sweep input frequency and gain, write sweep.csv");
    mc.app = app.add_subcommand("mc", "Monte-Carlo noise study, write mc.csv and mc_ref.csv");
    preset.app = app.add_subcommand("preset", "Run a named configuration with fixed parameters");

    add_common(simulate, false);
    add_param_flags(simulate, simulate_flags());
    bode_cmd.app->add_option("--config", bode_cmd.config_path, "JSON configuration file or a previous run manifest");
    bode_cmd.app->add_option("--set", bode_cmd.assignments, "Override a configuration entry, path=value");
    bode_cmd.app->add_option("--out", bode_cmd.out, "Output directory");
    add_param_flags(bode_cmd, bode_flags());
    add_common(sweep, true);
    add_param_flags(sweep, sweep_flags());
    add_common(mc, true);
    add_param_flags(mc, mc_flags());

    std::string preset_name_arg;
    std::size_t trajectory_stride = 10;
    std::vector<std::string> names;
    for (Preset p : all_presets()) {
        names.emplace_back(pllsim::preset_name(p));
    }
    preset.app->add_option("name", preset_name_arg, "Preset name")->required()->check(CLI::IsMember(names));
    preset.app->add_option("--out", preset.out, "Output directory");
    preset.app->add_option("--seed", preset.seed, "Master seed (default 0)");
    preset.app->add_option("--scale", preset.scale, "Fraction of the full horizon t_f = 10000 (default 0.2)");
    preset.app->add_option("--workers", preset.workers, "Worker threads, 0 for all cores")->capture_default_str();
    preset.app->add_option("--trajectory-stride", trajectory_stride, "Write every n-th step to trajectory.csv")
        ->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (simulate.app->parsed()) {
            return run_simulate(simulate, out);
        }
        if (bode_cmd.app->parsed()) {
            return run_bode(bode_cmd, out);
        }
        if (sweep.app->parsed()) {
            return run_sweep_command(sweep, out);
        }
        if (mc.app->parsed()) {
            return run_mc_command(mc, out);
        }
        return run_preset_command(preset, preset_name_arg, trajectory_stride, out);
    } catch (const ConfigError& e) {
        err << "pllsim: configuration error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        err << "pllsim: I/O error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        err << "pllsim: error: " << e.what() << '\n';
        return 1;
    } catch (const Json::exception& e) {
        err << "pllsim: configuration error: " << e.what() << '\n';
        return 2;
    }
}

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) {
        args.emplace_back(argv[i]);
    }
    return parse_and_dispatch(args, out, err);
}

}  // namespace pllsim::cli
