#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stancekit/annotation.hpp"
#include "stancekit/eval.hpp"
#include "stancekit/labels.hpp"
#include "stancekit/models/config.hpp"
#include "stancekit/nn/tensor.hpp"
#include "stancekit/nn/transformer.hpp"

namespace stancekit::models {

struct LabeledText {
  std::string id;
  std::string text;
  ClassLabel label = ClassLabel::kGeneric;
};

struct TextItem {
  std::string id;
  std::string text;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> validation_loss;
  std::optional<double> validation_accuracy;
  std::optional<double> validation_f1;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

using History = std::vector<EpochRecord>;

nlohmann::json to_json(const History& history);
History history_from_json(const nlohmann::json& rows);

// A tokenized input ready for the network. Transformer models use `ids`,
// static-embedding models `tokens`; `mask` marks active positions and may
// carry trailing padding.
struct Input {
  std::vector<int> ids;
  std::vector<std::string> tokens;
  nn::Mask mask;
};

// Encoder used when encoder_name is "mock": 4 layers, hidden 16, with a
// hashing tokenizer over 1000 ids.
nn::TransformerConfig mock_encoder_config();

// Resolves a model or embedding name: an existing path is used as is,
// otherwise the STANCEKIT_MODEL_CACHE directory is searched for NAME and
// NAME.skt.
std::filesystem::path resolve_model_file(const std::string& name);

struct ModelImpl;

// A classifier with its featurizer. Immutable once trained, so concurrent
// predict/logits calls are safe.
class Model {
 public:
  // Builds the network and initializes it from config.seed. Encoder and
  // embedding weights are loaded from the names in `config`.
  static Model create(const ModelConfig& config);
  static Model load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  using EpochCallback = std::function<void(const EpochRecord&)>;
  // Cross-entropy with Adam over shuffled mini-batches. Examples whose text
  // is too short are skipped (see skipped_ids()). Static-embedding models
  // stop early when validation F1 has not improved for `patience` epochs
  // and keep the best epoch's weights.
  const History& fit(std::span<const LabeledText> train, std::span<const LabeledText> validation = {},
                     const EpochCallback& on_epoch = {});

  // Raises kInputTooShort when nothing is left after tokenization.
  Input prepare(std::string_view text) const;
  eval::ScoreRow logits(const Input& input) const;
  eval::ScoreRow probabilities(std::string_view text) const;

  // One prediction per item; items the model cannot score carry an error
  // and no label.
  std::vector<eval::Prediction> predict(std::span<const TextItem> items, unsigned threads = 1) const;

  const ModelConfig& config() const;
  const History& history() const;
  const std::vector<std::string>& skipped_ids() const;
  std::size_t parameter_count() const;
  // Named parameter values widened to double, for inspection and tests.
  std::vector<std::pair<std::string, nn::Matrix<double>>> parameter_values() const;

 private:
  explicit Model(std::shared_ptr<ModelImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<ModelImpl> impl_;
};

Model train(const ModelConfig& config, std::span<const LabeledText> train,
            std::span<const LabeledText> validation = {});

// Labeled, non-excluded gold examples.
std::vector<LabeledText> labeled(std::span<const annotation::GoldExample> gold);

struct HeldOut {
  std::vector<LabeledText> train;
  std::vector<LabeledText> validation;
};

// Moves a stratified 15% of `train_set` into a validation set when the
// configuration uses early stopping; otherwise validation stays empty.
// The draw comes from stream `stream` of config.seed.
HeldOut hold_out_validation(std::vector<LabeledText> train_set, const ModelConfig& config, std::uint64_t stream);

// k-fold cross-validation. When early stopping applies, 15% of each
// training fold (stratified, seeded) is held out for validation.
eval::CvResult cross_validate_model(const ModelConfig& config, std::span<const annotation::GoldExample> gold,
                                    std::span<const std::vector<std::string>> folds, unsigned threads = 1);

}  // namespace stancekit::models
