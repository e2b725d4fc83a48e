#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace stancekit::models {

enum class Architecture { kCnnEmbed, kBilstmEmbed, kBert, kRoberta, kBertCnnLayerwise, kBertCnnFinal };

inline constexpr Architecture kAllArchitectures[] = {
    Architecture::kCnnEmbed, Architecture::kBilstmEmbed,       Architecture::kBert,
    Architecture::kRoberta,  Architecture::kBertCnnLayerwise, Architecture::kBertCnnFinal};

std::string_view to_string(Architecture arch);
std::optional<Architecture> parse_architecture(std::string_view name);
bool uses_encoder(Architecture arch);

enum class Precision { kFloat, kDouble };

struct ModelConfig {
  Architecture architecture = Architecture::kBertCnnFinal;
  std::size_t batch_size = 16;
  double learning_rate = 2e-5;
  double dropout = 0.2;
  std::size_t epochs = 10;
  std::size_t max_seq_length = 256;
  std::uint64_t seed = 42;
  std::string encoder_name;    // "mock" or a .skt file; transformer architectures
  std::string embedding_name;  // "mock", "mock:DIM" or a .vec file; static-embedding architectures

  std::size_t filters = 256;         // BERT+CNN heads
  std::size_t embed_filters = 100;   // per width, cnn_embed
  std::size_t hidden = 128;          // cnn_embed dense layer, bilstm per direction
  std::size_t embedding_dim = 300;
  std::size_t max_vocab = 1000000;   // rows kept from a .vec file
  std::size_t patience = 5;          // early stopping on validation F1; 0 disables
  bool freeze_encoder = false;
  Precision precision = Precision::kFloat;

  // Internal consistency; raises kConfig.
  void validate() const;
  // Deviations from the published hyperparameter grid, empty when the
  // configuration is a valid grid cell.
  std::vector<std::string> grid_violations() const;
};

// Published defaults for an architecture.
ModelConfig default_config(Architecture arch);

nlohmann::json to_json(const ModelConfig& config);
// Missing keys take the architecture's defaults.
ModelConfig model_config_from_json(const nlohmann::json& row);

}  // namespace stancekit::models
