#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace dcsr {

/// Parses the TOML subset used by experiment configs into JSON:
/// `[section]` / `[a.b]` headers, `key = value` pairs with strings, integers,
/// floats, booleans and single-line arrays of those, and `#` comments.
/// Throws ConfigError with the offending line number.
nlohmann::json parse_toml(std::string_view text);

/// Loads a config file; `.json` files are parsed as JSON, anything else as TOML.
nlohmann::json load_config_file(const std::filesystem::path& file);

}  // namespace dcsr
