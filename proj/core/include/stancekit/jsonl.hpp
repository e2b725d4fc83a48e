#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace stancekit::jsonl {

using Json = nlohmann::json;

// Calls `visit` for every non-blank line. Parse failures raise a parse
// Error that names the file and 1-based line number.
void for_each(const std::filesystem::path& path,
              const std::function<void(const Json&, std::size_t line)>& visit);

std::vector<Json> read(const std::filesystem::path& path);

void write(const std::filesystem::path& path, const std::vector<Json>& rows);

// Writes `contents` to a sibling temp file and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& contents);

std::string read_text(const std::filesystem::path& path);

}  // namespace stancekit::jsonl
