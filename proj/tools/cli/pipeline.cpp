#include "pipeline.hpp"

#include "stancekit/config_file.hpp"
#include "stancekit/error.hpp"
#include "stancekit/jsonl.hpp"

namespace stancekit::cli {
namespace {

constexpr std::string_view kDefaults = R"(
seed: 42
threads: 1
paths:
  lexicon: config/lexicon.yaml
split:
  ratio: 0.85
  k: 5
annotation:
  required_annotators: 2
  host: 127.0.0.1
  port: 8080
  lease_minutes: 30
zeroshot:
  strategy: single
  template: "This text expresses {tag} towards migrants."
  aggregation: mean
  backend: mock
model:
  architecture: bert_cnn_final
grid:
  manifest: config/grid.yaml
  out_dir: runs/grid
  jobs: 1
  overrides: []
)";

const nlohmann::json kNull;

}  // namespace

Pipeline Pipeline::load(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides,
                        std::optional<std::uint64_t> seed) {
  Pipeline p;
  p.settings = parse_config(kDefaults);
  if (file) {
    const auto loaded = load_config(*file);
    if (!loaded.is_null()) {
      if (!loaded.is_object()) fail(ErrorCode::kConfig, file->string() + " must be a mapping");
      p.settings.merge_patch(loaded);
    }
  }
  for (const auto& o : overrides) apply_override(p.settings, o);
  if (seed) p.settings["seed"] = *seed;
  if (!p.settings["seed"].is_number_unsigned() && !p.settings["seed"].is_number_integer()) {
    fail(ErrorCode::kConfig, "seed must be a non-negative integer");
  }
  return p;
}

std::uint64_t Pipeline::seed() const { return settings["seed"].get<std::uint64_t>(); }

const nlohmann::json& Pipeline::at(std::string_view dotted) const {
  const nlohmann::json* node = &settings;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string part(dotted.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (!node->is_object() || !node->contains(part)) return kNull;
    node = &(*node)[part];
    if (dot == std::string_view::npos) return *node;
    start = dot + 1;
  }
}

std::string Pipeline::text(std::string_view dotted) const {
  const auto& v = at(dotted);
  if (v.is_null()) return {};
  return v.is_string() ? v.get<std::string>() : v.dump();
}

std::filesystem::path Pipeline::path(const std::string& flag_value, std::string_view key, std::string_view flag) const {
  if (auto p = optional_path(flag_value, key)) return *p;
  fail(ErrorCode::kConfig, "no " + std::string(flag) + " given and " + std::string(key) + " is not configured");
}

std::optional<std::filesystem::path> Pipeline::optional_path(const std::string& flag_value, std::string_view key) const {
  if (!flag_value.empty()) return std::filesystem::path(flag_value);
  const auto configured = text(key);
  if (!configured.empty()) return std::filesystem::path(configured);
  return std::nullopt;
}

annotation::DatasetSplit Pipeline::split(std::span<const annotation::GoldExample> gold,
                                         const std::string& split_file) const {
  if (!split_file.empty()) {
    try {
      return annotation::split_from_json(nlohmann::json::parse(jsonl::read_text(split_file)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kParse, split_file + ": " + e.what());
    }
  }
  try {
    return annotation::split_dataset(gold, at("split.ratio").get<double>(), at("split.k").get<std::size_t>(), seed());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("bad split settings: ") + e.what());
  }
}

}  // namespace stancekit::cli
