#include "pllsim/config.hpp"
#include "pllsim/errors.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace pllsim {

namespace {

std::string join(const std::string& context, std::string_view key) {
    return context.empty() ? std::string(key) : context + "." + std::string(key);
}

const char* kind_name(const Json& j) {
    switch (j.type()) {
        case Json::value_t::null: return "null";
        case Json::value_t::boolean: return "boolean";
        case Json::value_t::number_unsigned: return "unsigned integer";
        case Json::value_t::number_integer: return "integer";
        case Json::value_t::number_float: return "number";
        case Json::value_t::string: return "string";
        case Json::value_t::array: return "array";
        case Json::value_t::object: return "object";
        default: return "value";
    }
}

// Strict view of one JSON object: typed lookups plus a final check that no
// key was left unread.
class ObjectReader {
public:
    ObjectReader(const Json& doc, std::string context) : doc_(doc), context_(std::move(context)) {
        if (!doc.is_object()) {
            throw ConfigError("config: " + (context_.empty() ? std::string("document") : context_) +
                              " must be an object, got " + kind_name(doc));
        }
    }

    const Json* find(const char* key) {
        seen_.insert(key);
        auto it = doc_.find(key);
        return it == doc_.end() ? nullptr : &*it;
    }

    void get(const char* key, double& out) {
        if (const Json* v = find(key)) {
            if (!v->is_number()) {
                type_error(key, "a number", *v);
            }
            out = v->get<double>();
        }
    }

    void get(const char* key, std::uint64_t& out) {
        if (const Json* v = find(key)) {
            if (!v->is_number_unsigned()) {
                type_error(key, "a non-negative integer", *v);
            }
            out = v->get<std::uint64_t>();
        }
    }

    void get(const char* key, std::vector<double>& out) {
        if (const Json* v = find(key)) {
            out = real_array(key, *v);
        }
    }

    std::vector<double> real_array(const char* key, const Json& v) const {
        if (!v.is_array()) {
            type_error(key, "an array of numbers", v);
        }
        std::vector<double> values;
        values.reserve(v.size());
        for (const auto& item : v) {
            if (!item.is_number()) {
                type_error(key, "an array of numbers", v);
            }
            values.push_back(item.get<double>());
        }
        return values;
    }

    [[nodiscard]] std::string path(const char* key) const { return join(context_, key); }

    void finish() const {
        for (auto it = doc_.begin(); it != doc_.end(); ++it) {
            if (!seen_.contains(it.key())) {
                throw ConfigError("config: unknown key '" + join(context_, it.key()) + "'");
            }
        }
    }

private:
    [[noreturn]] void type_error(const char* key, const char* expected, const Json& got) const {
        throw ConfigError("config: '" + join(context_, key) + "' must be " + expected + ", got " + kind_name(got));
    }

    const Json& doc_;
    std::string context_;
    std::set<std::string, std::less<>> seen_;
};

void get_size(ObjectReader& r, const char* key, std::size_t& out) {
    std::uint64_t v = out;
    r.get(key, v);
    out = static_cast<std::size_t>(v);
}

Json real_json(double v) {
    if (std::isfinite(v)) {
        return v;
    }
    if (std::isnan(v)) {
        return "nan";
    }
    return v > 0 ? "inf" : "-inf";
}

FilterSpec filter_from(const Json& doc, const std::string& context) {
    ObjectReader r(doc, context);
    const auto base = FilterSpec::loop_filter_default();
    std::vector<double> den(base.denominator().begin(), base.denominator().end());
    std::vector<double> num(base.numerator().begin(), base.numerator().end());
    r.get("denom_coeffs", den);
    r.get("num_coeffs", num);
    r.finish();
    return FilterSpec(std::move(den), std::move(num));
}

PllParams params_from(const Json& doc, const std::string& context) {
    ObjectReader r(doc, context);
    PllParams p;
    r.get("omega0", p.omega0);
    r.get("kv", p.kv);
    r.get("kd", p.kd);
    r.get("ki", p.ki);
    if (const Json* f = r.find("filter")) {
        p.filter = filter_from(*f, r.path("filter"));
    }
    r.finish();
    return p;
}

InputSpec input_from(const Json& doc, const std::string& context) {
    ObjectReader r(doc, context);
    InputSpec s;
    r.get("amplitude", s.amplitude);
    r.get("omega_i", s.omega_i);
    r.finish();
    return s;
}

NoiseSpec noise_from(const Json& doc, const std::string& context) {
    ObjectReader r(doc, context);
    NoiseSpec s;
    r.get("input_noise_variance", s.input_noise_variance);
    r.get("omega0_noise_variance", s.omega0_noise_variance);
    r.get("seed", s.seed);
    r.finish();
    return s;
}

InitSpec init_from(const Json& doc, const std::string& context) {
    ObjectReader r(doc, context);
    InitSpec s;
    r.get("variance", s.variance);
    r.get("seed", s.seed);
    r.finish();
    return s;
}

// Which SimConfig keys a document may carry. Sweep and MC templates leave out
// what is set per cell or per run.
enum class SimKeys { full, mc_template, sweep_template };

Json sim_json(const SimConfig& sim, SimKeys keys) {
    Json j = {{"dt", sim.dt}, {"t_final", sim.t_final}, {"record_stride", sim.record_stride}};
    if (keys == SimKeys::sweep_template) {
        j["input"] = {{"amplitude", sim.input.amplitude}};
    } else {
        j["input"] = to_json(sim.input);
    }
    if (keys == SimKeys::full) {
        j["noise"] = to_json(sim.noise);
        j["init"] = to_json(sim.init);
        if (sim.initial_state) {
            j["initial_state"] = std::vector<double>(sim.initial_state->values().begin(),
                                                     sim.initial_state->values().end());
        }
    } else {
        j["init"] = {{"variance", sim.init.variance}};
    }
    return j;
}

SimConfig sim_from(const Json& doc, const std::string& context, SimKeys keys, const SimConfig& base,
                   const PllParams* params_for_state) {
    ObjectReader r(doc, context);
    SimConfig s = base;
    r.get("dt", s.dt);
    r.get("t_final", s.t_final);
    get_size(r, "record_stride", s.record_stride);
    if (const Json* v = r.find("input")) {
        if (keys == SimKeys::sweep_template) {
            ObjectReader ri(*v, r.path("input"));
            ri.get("amplitude", s.input.amplitude);
            ri.finish();
        } else {
            s.input = input_from(*v, r.path("input"));
        }
    }
    if (const Json* v = r.find("init")) {
        if (keys == SimKeys::full) {
            s.init = init_from(*v, r.path("init"));
        } else {
            ObjectReader ri(*v, r.path("init"));
            ri.get("variance", s.init.variance);
            ri.finish();
        }
    }
    if (keys == SimKeys::full) {
        if (const Json* v = r.find("noise")) {
            s.noise = noise_from(*v, r.path("noise"));
        }
        if (const Json* v = r.find("initial_state")) {
            const auto values = r.real_array("initial_state", *v);
            const PllParams params = params_for_state ? *params_for_state : PllParams{};
            NodeState state = NodeState::zeros_for(params);
            if (values.size() != state.size()) {
                throw ConfigError("config: '" + r.path("initial_state") + "' needs " +
                                  std::to_string(state.size()) + " entries for these parameters, got " +
                                  std::to_string(values.size()));
            }
            std::copy(values.begin(), values.end(), state.values().begin());
            s.initial_state = std::move(state);
        }
    }
    r.finish();
    return s;
}

GridAxis axis_from(const Json& doc, const std::string& context, GridAxis axis) {
    ObjectReader r(doc, context);
    r.get("low", axis.low);
    r.get("high", axis.high);
    get_size(r, "count", axis.count);
    r.finish();
    return axis;
}

const Json* walk(const Json& doc, const std::vector<std::string>& parts) {
    const Json* node = &doc;
    for (const auto& part : parts) {
        if (!node->is_object()) {
            return nullptr;
        }
        auto it = node->find(part);
        if (it == node->end()) {
            return nullptr;
        }
        node = &*it;
    }
    return node;
}

std::vector<std::string> split_path(std::string_view path) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const auto part = path.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
        if (part.empty()) {
            throw ConfigError("override: malformed path '" + std::string(path) + "'");
        }
        parts.emplace_back(part);
        if (dot == std::string_view::npos) {
            break;
        }
        start = dot + 1;
    }
    return parts;
}

bool compatible(const Json& expected, const Json& value) {
    if (expected.is_number_unsigned()) {
        return value.is_number_unsigned();
    }
    if (expected.is_number()) {
        return value.is_number();
    }
    if (expected.is_array()) {
        if (!value.is_array()) {
            return false;
        }
        for (const auto& item : value) {
            if (!item.is_number()) {
                return false;
            }
        }
        return true;
    }
    if (expected.is_object()) {
        return value.is_object();
    }
    return expected.type() == value.type();
}

}  // namespace

Json to_json(const FilterSpec& filter) {
    return {{"denom_coeffs", std::vector<double>(filter.denominator().begin(), filter.denominator().end())},
            {"num_coeffs", std::vector<double>(filter.numerator().begin(), filter.numerator().end())}};
}

Json to_json(const PllParams& p) {
    return {{"omega0", p.omega0}, {"kv", p.kv}, {"kd", p.kd}, {"ki", p.ki}, {"filter", to_json(p.filter)}};
}

Json to_json(const InputSpec& s) { return {{"amplitude", s.amplitude}, {"omega_i", s.omega_i}}; }

Json to_json(const NoiseSpec& s) {
    return {{"input_noise_variance", s.input_noise_variance},
            {"omega0_noise_variance", s.omega0_noise_variance},
            {"seed", s.seed}};
}

Json to_json(const InitSpec& s) { return {{"variance", s.variance}, {"seed", s.seed}}; }

Json to_json(const SimConfig& sim) { return sim_json(sim, SimKeys::full); }

Json to_json(const GridAxis& a) { return {{"low", a.low}, {"high", a.high}, {"count", a.count}}; }

Json to_json(const SweepSpec& s) {
    Json fixed = to_json(s.fixed);
    fixed.erase("kv");
    fixed.erase("kd");
    return {{"omega_i_range", to_json(s.omega_i_range)},
            {"gain_range", to_json(s.gain_range)},
            {"fixed", fixed},
            {"sim", sim_json(s.sim, SimKeys::sweep_template)},
            {"noise",
             {{"input_noise_variance", s.noise.input_noise_variance},
              {"omega0_noise_variance", s.noise.omega0_noise_variance}}},
            {"master_seed", s.master_seed},
            {"window_start_fraction", s.window_start_fraction}};
}

Json to_json(const McSpec& s) {
    return {{"runs", s.runs},
            {"params", to_json(s.params)},
            {"sim", sim_json(s.sim, SimKeys::mc_template)},
            {"noise",
             {{"input_noise_variance", s.noise.input_noise_variance},
              {"omega0_noise_variance", s.noise.omega0_noise_variance}}},
            {"master_seed", s.master_seed},
            {"window_start_fraction", s.window_start_fraction},
            {"f_thresholds", s.f_thresholds}};
}

Json to_json(const MetricsRecord& r) {
    return {{"f", real_json(r.f)},
            {"e_max", real_json(r.e_max)},
            {"m", real_json(r.m)},
            {"s", real_json(r.s)},
            {"omega_hat", real_json(r.omega_hat)},
            {"freq_locked", r.freq_locked},
            {"phase_entrained", r.phase_entrained}};
}

template <>
FilterSpec from_json<FilterSpec>(const Json& doc) {
    return filter_from(doc, "filter");
}

template <>
PllParams from_json<PllParams>(const Json& doc) {
    return params_from(doc, "params");
}

template <>
InputSpec from_json<InputSpec>(const Json& doc) {
    return input_from(doc, "input");
}

template <>
NoiseSpec from_json<NoiseSpec>(const Json& doc) {
    return noise_from(doc, "noise");
}

template <>
InitSpec from_json<InitSpec>(const Json& doc) {
    return init_from(doc, "init");
}

template <>
SimConfig from_json<SimConfig>(const Json& doc) {
    return sim_from(doc, "sim", SimKeys::full, SimConfig{}, nullptr);
}

SimConfig sim_config_from_json(const Json& doc, const PllParams& params) {
    return sim_from(doc, "sim", SimKeys::full, SimConfig{}, &params);
}

template <>
GridAxis from_json<GridAxis>(const Json& doc) {
    return axis_from(doc, "axis", GridAxis{});
}

template <>
SweepSpec from_json<SweepSpec>(const Json& doc) {
    ObjectReader r(doc, "");
    SweepSpec s;
    if (const Json* v = r.find("omega_i_range")) {
        s.omega_i_range = axis_from(*v, "omega_i_range", s.omega_i_range);
    }
    if (const Json* v = r.find("gain_range")) {
        s.gain_range = axis_from(*v, "gain_range", s.gain_range);
    }
    if (const Json* v = r.find("fixed")) {
        ObjectReader rf(*v, "fixed");
        rf.get("omega0", s.fixed.omega0);
        rf.get("ki", s.fixed.ki);
        if (const Json* f = rf.find("filter")) {
            s.fixed.filter = filter_from(*f, "fixed.filter");
        }
        rf.finish();
    }
    if (const Json* v = r.find("sim")) {
        s.sim = sim_from(*v, "sim", SimKeys::sweep_template, s.sim, nullptr);
    }
    if (const Json* v = r.find("noise")) {
        ObjectReader rn(*v, "noise");
        rn.get("input_noise_variance", s.noise.input_noise_variance);
        rn.get("omega0_noise_variance", s.noise.omega0_noise_variance);
        rn.finish();
    }
    r.get("master_seed", s.master_seed);
    r.get("window_start_fraction", s.window_start_fraction);
    r.finish();
    return s;
}

template <>
McSpec from_json<McSpec>(const Json& doc) {
    ObjectReader r(doc, "");
    McSpec s;
    get_size(r, "runs", s.runs);
    if (const Json* v = r.find("params")) {
        s.params = params_from(*v, "params");
    }
    if (const Json* v = r.find("sim")) {
        s.sim = sim_from(*v, "sim", SimKeys::mc_template, s.sim, nullptr);
    }
    if (const Json* v = r.find("noise")) {
        ObjectReader rn(*v, "noise");
        rn.get("input_noise_variance", s.noise.input_noise_variance);
        rn.get("omega0_noise_variance", s.noise.omega0_noise_variance);
        rn.finish();
    }
    r.get("master_seed", s.master_seed);
    r.get("window_start_fraction", s.window_start_fraction);
    r.get("f_thresholds", s.f_thresholds);
    r.finish();
    return s;
}

Json load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError(path.string(), "cannot open config file");
    }
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("config: " + path.string() + ": " + e.what());
    }
    if (doc.is_object() && doc.contains("tool") && doc.contains("config")) {
        return doc.at("config");
    }
    return doc;
}

void set_checked(Json& doc, const Json& schema, std::string_view path, const Json& value) {
    const auto parts = split_path(path);
    const Json* expected = walk(schema, parts);
    if (expected == nullptr) {
        throw ConfigError("override: unknown parameter '" + std::string(path) + "'");
    }
    if (!compatible(*expected, value)) {
        throw ConfigError("override: '" + std::string(path) + "' expects " + kind_name(*expected) + ", got " +
                          kind_name(value) + " (" + value.dump() + ")");
    }
    Json* node = &doc;
    for (const auto& part : parts) {
        if (!node->is_object()) {
            *node = Json::object();
        }
        node = &(*node)[part];
    }
    // Store integers given for real-valued entries as reals so that a manifest
    // written after an override reads back identically.
    Json stored = value;
    if (expected->is_number_float() && stored.is_number()) {
        stored = stored.get<double>();
    } else if (expected->is_array() && stored.is_array()) {
        for (auto& element : stored) {
            element = element.get<double>();
        }
    }
    *node = std::move(stored);
}

void apply_override(Json& doc, const Json& schema, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ConfigError("override: expected path=value, got '" + std::string(assignment) + "'");
    }
    const auto path = assignment.substr(0, eq);
    const auto text = assignment.substr(eq + 1);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) {
        value = std::string(text);
    }
    set_checked(doc, schema, path, value);
}

}  // namespace pllsim
