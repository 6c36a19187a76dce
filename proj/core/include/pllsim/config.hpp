#pragma once

#include "pllsim/experiments.hpp"
#include "pllsim/integrator.hpp"
#include "pllsim/model.hpp"
#include "pllsim/signals.hpp"

#include <filesystem>
#include <string_view>

#include <nlohmann/json.hpp>

// JSON mapping of the configuration types. Keys are the C++ field names.
// Parsing is strict: unknown keys and wrongly typed values throw ConfigError
// naming the offending key; missing keys keep their defaults.

namespace pllsim {

using Json = nlohmann::json;

Json to_json(const FilterSpec& filter);
Json to_json(const PllParams& params);
Json to_json(const InputSpec& input);
Json to_json(const NoiseSpec& noise);
Json to_json(const InitSpec& init);
Json to_json(const SimConfig& sim);
Json to_json(const GridAxis& axis);
Json to_json(const SweepSpec& spec);
Json to_json(const McSpec& spec);
Json to_json(const MetricsRecord& record);

template <class T>
T from_json(const Json& doc);

template <> FilterSpec from_json<FilterSpec>(const Json& doc);
template <> PllParams from_json<PllParams>(const Json& doc);
template <> InputSpec from_json<InputSpec>(const Json& doc);
template <> NoiseSpec from_json<NoiseSpec>(const Json& doc);
template <> InitSpec from_json<InitSpec>(const Json& doc);
template <> SimConfig from_json<SimConfig>(const Json& doc);
template <> GridAxis from_json<GridAxis>(const Json& doc);
template <> SweepSpec from_json<SweepSpec>(const Json& doc);
template <> McSpec from_json<McSpec>(const Json& doc);

/// SimConfig whose optional "initial_state" array is laid out for `params`.
SimConfig sim_config_from_json(const Json& doc, const PllParams& params);

/// Reads a JSON file. A run manifest is accepted too: its "config" member is
/// returned. Throws IoError when unreadable and ConfigError when malformed.
Json load_config_file(const std::filesystem::path& path);

/**
 * Applies "dotted.path=value" to `doc`. The value is parsed as JSON, falling
 * back to a plain string. The path must exist in `schema` and the value must
 * have the same kind (number, unsigned integer, boolean, string, array, object);
 * otherwise ConfigError is thrown before anything is changed.
 */
void apply_override(Json& doc, const Json& schema, std::string_view assignment);

/// Sets `path` in `doc` after the same schema check as apply_override.
void set_checked(Json& doc, const Json& schema, std::string_view path, const Json& value);

}  // namespace pllsim
