#pragma once

#include <filesystem>
#include <string_view>

#include <nlohmann/json.hpp>

namespace stancekit {

// Parses a YAML (or JSON) document into JSON. Plain scalars become
// integers, reals, booleans or null when they read as such; quoted
// scalars stay strings. Raises kParse on malformed input.
nlohmann::json parse_config(std::string_view document);
nlohmann::json load_config(const std::filesystem::path& path);

// Applies "key=value" (value parsed like a YAML scalar) to `target`,
// where key may be dotted ("split.seed").
void apply_override(nlohmann::json& target, std::string_view assignment);

}  // namespace stancekit
