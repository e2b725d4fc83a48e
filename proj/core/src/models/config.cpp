#include "stancekit/models/config.hpp"

#include <cmath>

#include "stancekit/error.hpp"

namespace stancekit::models {

std::string_view to_string(Architecture arch) {
  switch (arch) {
    case Architecture::kCnnEmbed: return "cnn_embed";
    case Architecture::kBilstmEmbed: return "bilstm_embed";
    case Architecture::kBert: return "bert";
    case Architecture::kRoberta: return "roberta";
    case Architecture::kBertCnnLayerwise: return "bert_cnn_layerwise";
    case Architecture::kBertCnnFinal: return "bert_cnn_final";
  }
  return "unknown";
}

std::optional<Architecture> parse_architecture(std::string_view name) {
  for (Architecture arch : kAllArchitectures) {
    if (to_string(arch) == name) return arch;
  }
  return std::nullopt;
}

bool uses_encoder(Architecture arch) {
  return arch != Architecture::kCnnEmbed && arch != Architecture::kBilstmEmbed;
}

ModelConfig default_config(Architecture arch) {
  ModelConfig c;
  c.architecture = arch;
  if (uses_encoder(arch)) {
    c.encoder_name = arch == Architecture::kRoberta ? "roberta-base.skt" : "bert-base-uncased.skt";
    return c;
  }
  c.batch_size = 32;
  c.learning_rate = 1e-3;
  c.dropout = arch == Architecture::kCnnEmbed ? 0.4 : 0.5;
  c.epochs = 30;
  c.max_seq_length = 64;
  c.embedding_name = "wiki-news-300d-1M.vec";
  return c;
}

void ModelConfig::validate() const {
  auto bad = [](const std::string& msg) { fail(ErrorCode::kConfig, msg); };
  if (batch_size == 0) bad("batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) bad("learning_rate must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) bad("dropout must lie in [0, 1)");
  if (max_seq_length == 0) bad("max_seq_length must be positive");
  if (uses_encoder(architecture)) {
    if (max_seq_length < 5) bad("max_seq_length must leave room for three tokens and the boundary markers");
    if (encoder_name.empty()) bad(std::string(to_string(architecture)) + " needs encoder_name");
    if (filters == 0) bad("filters must be positive");
  } else {
    if (embedding_name.empty()) bad(std::string(to_string(architecture)) + " needs embedding_name");
    if (embedding_dim == 0 || hidden == 0 || embed_filters == 0) bad("layer sizes must be positive");
  }
}

std::vector<std::string> ModelConfig::grid_violations() const {
  std::vector<std::string> out;
  if (batch_size != 16 && batch_size != 32) out.push_back("batch_size must be 16 or 32");
  if (uses_encoder(architecture)) {
    if (std::abs(dropout - 0.2) > 1e-12) out.push_back("transformer dropout must be 0.2");
    if (max_seq_length != 256) out.push_back("transformer max_seq_length must be 256");
    const bool lr_ok = std::abs(learning_rate - 1e-5) < 1e-12 || std::abs(learning_rate - 2e-5) < 1e-12 ||
                       std::abs(learning_rate - 3e-5) < 1e-12;
    if (!lr_ok) out.push_back("transformer learning_rate must be 1e-5, 2e-5 or 3e-5");
    if (epochs != 10) out.push_back("transformer epochs must be 10");
  } else {
    if (std::abs(dropout - 0.4) > 1e-12 && std::abs(dropout - 0.5) > 1e-12) {
      out.push_back("cnn_embed/bilstm_embed dropout must be 0.4 or 0.5");
    }
    if (embedding_dim != 300) out.push_back("embedding dimension must be 300");
  }
  return out;
}

namespace {
std::string_view precision_name(Precision p) { return p == Precision::kFloat ? "float" : "double"; }
}  // namespace

nlohmann::json to_json(const ModelConfig& c) {
  return {{"architecture", to_string(c.architecture)},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"dropout", c.dropout},
          {"epochs", c.epochs},
          {"max_seq_length", c.max_seq_length},
          {"seed", c.seed},
          {"encoder_name", c.encoder_name},
          {"embedding_name", c.embedding_name},
          {"filters", c.filters},
          {"embed_filters", c.embed_filters},
          {"hidden", c.hidden},
          {"embedding_dim", c.embedding_dim},
          {"max_vocab", c.max_vocab},
          {"patience", c.patience},
          {"freeze_encoder", c.freeze_encoder},
          {"precision", precision_name(c.precision)}};
}

ModelConfig model_config_from_json(const nlohmann::json& row) {
  const auto name = row.at("architecture").get<std::string>();
  const auto arch = parse_architecture(name);
  if (!arch) fail(ErrorCode::kConfig, "unknown architecture " + name);
  ModelConfig c = default_config(*arch);
  try {
    c.batch_size = row.value("batch_size", c.batch_size);
    c.learning_rate = row.value("learning_rate", c.learning_rate);
    c.dropout = row.value("dropout", c.dropout);
    c.epochs = row.value("epochs", c.epochs);
    c.max_seq_length = row.value("max_seq_length", c.max_seq_length);
    c.seed = row.value("seed", c.seed);
    c.encoder_name = row.value("encoder_name", c.encoder_name);
    c.embedding_name = row.value("embedding_name", c.embedding_name);
    c.filters = row.value("filters", c.filters);
    c.embed_filters = row.value("embed_filters", c.embed_filters);
    c.hidden = row.value("hidden", c.hidden);
    c.embedding_dim = row.value("embedding_dim", c.embedding_dim);
    c.max_vocab = row.value("max_vocab", c.max_vocab);
    c.patience = row.value("patience", c.patience);
    c.freeze_encoder = row.value("freeze_encoder", c.freeze_encoder);
    const auto precision = row.value("precision", std::string(precision_name(c.precision)));
    if (precision == "float") {
      c.precision = Precision::kFloat;
    } else if (precision == "double") {
      c.precision = Precision::kDouble;
    } else {
      fail(ErrorCode::kConfig, "precision must be float or double, got " + precision);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("bad model config: ") + e.what());
  }
  return c;
}

}  // namespace stancekit::models
