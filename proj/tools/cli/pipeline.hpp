#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stancekit/annotation.hpp"

namespace stancekit::cli {

// Pipeline settings: built-in defaults, then the --config file, then
// --set overrides, then --seed. Subcommand flags win over all of these.
struct Pipeline {
  nlohmann::json settings;

  static Pipeline load(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides,
                       std::optional<std::uint64_t> seed);

  std::uint64_t seed() const;
  // Value at a dotted key, or null.
  const nlohmann::json& at(std::string_view dotted) const;
  std::string text(std::string_view dotted) const;  // "" when unset

  // The flag value when given, else the configured path; raises kConfig
  // naming both when neither is set.
  std::filesystem::path path(const std::string& flag_value, std::string_view key, std::string_view flag) const;
  std::optional<std::filesystem::path> optional_path(const std::string& flag_value, std::string_view key) const;

  // Reads `split_file` when given, else splits `gold` with the configured
  // ratio and k and the pipeline seed.
  annotation::DatasetSplit split(std::span<const annotation::GoldExample> gold, const std::string& split_file) const;
};

}  // namespace stancekit::cli
