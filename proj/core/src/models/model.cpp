#include "stancekit/models/model.hpp"

#include <atomic>
#include <cstdlib>
#include <numeric>
#include <thread>

#include "stancekit/error.hpp"
#include "stancekit/models/heads.hpp"
#include "stancekit/nn/container.hpp"
#include "stancekit/nn/embeddings.hpp"
#include "stancekit/nn/optim.hpp"
#include "stancekit/nn/tokenizer.hpp"

namespace stancekit::models {

nlohmann::json to_json(const History& history) {
  auto rows = nlohmann::json::array();
  for (const auto& r : history) {
    nlohmann::json row = {{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"train_accuracy", r.train_accuracy}};
    if (r.validation_loss) row["validation_loss"] = *r.validation_loss;
    if (r.validation_accuracy) row["validation_accuracy"] = *r.validation_accuracy;
    if (r.validation_f1) row["validation_f1"] = *r.validation_f1;
    rows.push_back(std::move(row));
  }
  return rows;
}

History history_from_json(const nlohmann::json& rows) {
  History out;
  for (const auto& row : rows) {
    EpochRecord r;
    r.epoch = row.at("epoch").get<std::size_t>();
    r.train_loss = row.at("train_loss").get<double>();
    r.train_accuracy = row.at("train_accuracy").get<double>();
    if (row.contains("validation_loss")) r.validation_loss = row["validation_loss"].get<double>();
    if (row.contains("validation_accuracy")) r.validation_accuracy = row["validation_accuracy"].get<double>();
    if (row.contains("validation_f1")) r.validation_f1 = row["validation_f1"].get<double>();
    out.push_back(r);
  }
  return out;
}

nn::TransformerConfig mock_encoder_config() {
  nn::TransformerConfig c;
  c.family = "bert";
  c.vocab_size = 1000;
  c.hidden = 16;
  c.layers = 4;
  c.heads = 2;
  c.intermediate = 64;
  c.max_positions = 512;
  return c;
}

std::filesystem::path resolve_model_file(const std::string& name) {
  if (std::filesystem::exists(name)) return name;
  if (const char* cache = std::getenv("STANCEKIT_MODEL_CACHE")) {
    for (const auto& candidate : {std::filesystem::path(cache) / name, std::filesystem::path(cache) / (name + ".skt")}) {
      if (std::filesystem::exists(candidate)) return candidate;
    }
  }
  fail(ErrorCode::kModelLoad, "cannot find model file " + name + " (set STANCEKIT_MODEL_CACHE or pass a path)");
}

struct ModelImpl {
  ModelConfig config;
  History history;
  std::vector<std::string> skipped;

  virtual ~ModelImpl() = default;
  virtual Input prepare(std::string_view text) const = 0;
  virtual eval::ScoreRow logits(const Input& input) const = 0;
  virtual void fit(std::span<const LabeledText> train, std::span<const LabeledText> validation,
                   const Model::EpochCallback& on_epoch) = 0;
  virtual void store(nn::Archive& archive) const = 0;
  virtual void restore(const nn::Archive& archive) = 0;
  virtual std::size_t parameter_count() const = 0;
  virtual std::vector<std::pair<std::string, nn::Matrix<double>>> parameter_values() const = 0;
};

namespace {

constexpr std::string_view kCheckpointFormat = "stancekit-model";

std::size_t argmax(const eval::ScoreRow& row) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k) {
    if (row[k] > row[best]) best = k;
  }
  return best;
}

eval::ScoreRow softmax_row(const eval::ScoreRow& logits) {
  eval::ScoreRow out{};
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k) sum += out[k] = std::exp(logits[k] - m);
  for (auto& v : out) v /= sum;
  return out;
}

template <typename T>
class Classifier final : public ModelImpl {
 public:
  // Fresh network; `encoder_archive` holds pretrained weights when the
  // encoder is not the mock.
  Classifier(const ModelConfig& cfg, const nn::Archive* encoder_archive, nlohmann::json encoder_meta) {
    config = cfg;
    Rng init_rng = Rng::derive(cfg.seed, 0);
    if (uses_encoder(cfg.architecture)) {
      const nn::TransformerConfig enc_config = nn::transformer_config_from_json(encoder_meta.at("config"));
      enc_config.validate();
      encoder_meta_ = std::move(encoder_meta);
      encoder_ = std::make_unique<nn::TransformerEncoder<T>>(enc_config);
      tokenizer_ = nn::tokenizer_from_json(encoder_meta_.at("tokenizer"));
      encoder_->init(init_rng, 0.02);
      if (encoder_archive) {
        nn::ParamRefs<T> params;
        encoder_->parameters(params);
        nn::load_params(params, *encoder_archive);
      }
      encoder_->set_trainable(!cfg.freeze_encoder);
      head_ = make_head<T>(cfg, enc_config.hidden, enc_config.layers + 1);
      head_->init(init_rng);
      if (auto* seq = dynamic_cast<SequenceClassificationHead<T>*>(head_.get());
          seq && encoder_archive && encoder_archive->tensors.contains("pooler.dense.weight")) {
        encoder_archive->load_into(seq->pooler.weight);
        encoder_archive->load_into(seq->pooler.bias);
      }
    } else {
      embeddings_ = std::make_shared<nn::StaticEmbeddings>(load_embeddings(cfg));
      head_ = make_head<T>(cfg, embeddings_->dim(), 1);
      head_->init(init_rng);
    }
  }

  Input prepare(std::string_view text) const override {
    Input in;
    if (encoder_) {
      auto enc = tokenizer_->encode(text, config.max_seq_length);
      if (enc.content_tokens == 0) fail(ErrorCode::kInputTooShort, "empty text after tokenization");
      in.ids = std::move(enc.ids);
      in.mask = std::move(enc.mask);
    } else {
      in.tokens = nn::StaticEmbeddings::tokenize(text, config.max_seq_length);
      if (in.tokens.empty()) fail(ErrorCode::kInputTooShort, "empty text after tokenization");
      in.mask.assign(in.tokens.size(), 1);
    }
    return in;
  }

  eval::ScoreRow logits(const Input& input) const override {
    const auto layers = featurize(input, nullptr);
    const RowVector<T> z = head_->forward(layers, input.mask, nullptr, nullptr);
    eval::ScoreRow out{};
    for (std::size_t k = 0; k < kNumClasses; ++k) out[k] = static_cast<double>(z(static_cast<Eigen::Index>(k)));
    return out;
  }

  void fit(std::span<const LabeledText> train, std::span<const LabeledText> validation,
           const Model::EpochCallback& on_epoch) override {
    if (train.empty()) fail(ErrorCode::kValidation, "empty training set");
    for (const auto& ex : train) {
      if (index_of(ex.label) >= kNumClasses) fail(ErrorCode::kValidation, "unknown label for " + ex.id);
    }
    skipped.clear();
    const auto train_set = prepare_all(train, true);
    const auto valid_set = prepare_all(validation, false);
    if (train_set.empty()) fail(ErrorCode::kValidation, "no training example survives tokenization");

    nn::ParamRefs<T> params;
    head_->parameters(params);
    const bool encoder_trainable = encoder_ && !config.freeze_encoder;
    if (encoder_trainable) encoder_->parameters(params);
    nn::Adam<T> adam({.learning_rate = config.learning_rate});
    Rng shuffle_rng = Rng::derive(config.seed, 1);
    Rng dropout_rng = Rng::derive(config.seed, 2);

    const bool early_stopping = !encoder_ && config.patience > 0 && !valid_set.empty();
    double best_f1 = -1.0;
    std::size_t since_best = 0;
    std::vector<nn::Matrix<T>> best_weights;

    std::vector<std::size_t> order(train_set.size());
    auto head_cache = head_->make_cache();
    typename nn::TransformerEncoder<T>::Cache enc_cache;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      shuffle_rng.shuffle(std::span<std::size_t>(order));
      double loss_sum = 0.0;
      std::size_t correct = 0;
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t end = std::min(order.size(), start + config.batch_size);
        const T scale = T(1) / static_cast<T>(end - start);
        for (auto* p : params) p->zero_grad();
        for (std::size_t b = start; b < end; ++b) {
          const Prepared& ex = train_set[order[b]];
          const auto layers = ex.features.empty() ? featurize(ex.input, encoder_trainable ? &enc_cache : nullptr)
                                                  : ex.features;
          const RowVector<T> z = head_->forward(layers, ex.input.mask, head_cache.get(), &dropout_rng);
          const RowVector<T> p = nn::softmax<T>(z);
          const auto y = static_cast<Eigen::Index>(index_of(ex.label));
          loss_sum += -std::log(std::max(static_cast<double>(p(y)), 1e-300));
          Eigen::Index pred = 0;
          p.maxCoeff(&pred);
          correct += pred == y ? 1 : 0;
          RowVector<T> dz = p;
          dz(y) -= T(1);
          dz *= scale;
          if (encoder_trainable) {
            std::vector<nn::Matrix<T>> dlayers;
            for (const auto& m : layers) dlayers.push_back(nn::Matrix<T>::Zero(m.rows(), m.cols()));
            head_->backward(*head_cache, dz, &dlayers);
            encoder_->backward(enc_cache, dlayers);
          } else {
            head_->backward(*head_cache, dz, nullptr);
          }
        }
        adam.step(params);
      }

      EpochRecord record;
      record.epoch = epoch;
      record.train_loss = loss_sum / static_cast<double>(train_set.size());
      record.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
      if (!valid_set.empty()) score_validation(valid_set, record);
      history.push_back(record);
      if (on_epoch) on_epoch(record);

      if (early_stopping) {
        if (*record.validation_f1 > best_f1) {
          best_f1 = *record.validation_f1;
          since_best = 0;
          best_weights.clear();
          for (auto* p : params) best_weights.push_back(p->value);
        } else if (++since_best >= config.patience) {
          break;
        }
      }
    }
    if (early_stopping && !best_weights.empty()) {
      for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_weights[i];
    }
  }

  void store(nn::Archive& archive) const override {
    nn::ParamRefs<T> params;
    const_cast<Classifier*>(this)->all_parameters(params);
    nn::store_params(params, archive);
    if (encoder_) archive.meta["encoder"] = encoder_meta_;
  }

  void restore(const nn::Archive& archive) override {
    nn::ParamRefs<T> params;
    all_parameters(params);
    nn::load_params(params, archive);
  }

  std::size_t parameter_count() const override {
    nn::ParamRefs<T> params;
    const_cast<Classifier*>(this)->all_parameters(params);
    std::size_t n = 0;
    for (auto* p : params) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

  std::vector<std::pair<std::string, nn::Matrix<double>>> parameter_values() const override {
    nn::ParamRefs<T> params;
    const_cast<Classifier*>(this)->all_parameters(params);
    std::vector<std::pair<std::string, nn::Matrix<double>>> out;
    for (auto* p : params) out.emplace_back(p->name, p->value.template cast<double>());
    return out;
  }

 private:
  struct Prepared {
    Input input;
    ClassLabel label;
    std::vector<nn::Matrix<T>> features;  // cached when the featurizer is frozen
  };

  static nn::StaticEmbeddings load_embeddings(const ModelConfig& cfg) {
    if (cfg.embedding_name == "mock" || cfg.embedding_name.rfind("mock:", 0) == 0) {
      return nn::StaticEmbeddings::from_spec(cfg.embedding_name == "mock"
                                                 ? "mock:" + std::to_string(cfg.embedding_dim)
                                                 : cfg.embedding_name);
    }
    return nn::StaticEmbeddings::load_vec(resolve_model_file(cfg.embedding_name), cfg.max_vocab);
  }

  void all_parameters(nn::ParamRefs<T>& out) {
    if (encoder_) encoder_->parameters(out);
    head_->parameters(out);
  }

  std::vector<nn::Matrix<T>> featurize(const Input& input, typename nn::TransformerEncoder<T>::Cache* cache) const {
    if (encoder_) return encoder_->forward(input.ids, input.mask, cache);
    return {embeddings_->lookup<T>(input.tokens)};
  }

  std::vector<Prepared> prepare_all(std::span<const LabeledText> examples, bool record_skips) {
    std::vector<Prepared> out;
    const bool cache_features = !encoder_ || config.freeze_encoder;
    for (const auto& ex : examples) {
      Prepared p;
      try {
        p.input = prepare(ex.text);
        if (encoder_ && p.input.ids.size() < kMinActivePositions) fail(ErrorCode::kInputTooShort, "too short");
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kInputTooShort) throw;
        if (record_skips) skipped.push_back(ex.id);
        continue;
      }
      p.label = ex.label;
      if (cache_features) p.features = featurize(p.input, nullptr);
      out.push_back(std::move(p));
    }
    return out;
  }

  void score_validation(const std::vector<Prepared>& set, EpochRecord& record) const {
    double loss = 0.0;
    std::vector<ClassLabel> truth, pred;
    for (const auto& ex : set) {
      const auto layers = ex.features.empty() ? featurize(ex.input, nullptr) : ex.features;
      const RowVector<T> p = nn::softmax<T>(head_->forward(layers, ex.input.mask, nullptr, nullptr));
      const auto y = static_cast<Eigen::Index>(index_of(ex.label));
      loss += -std::log(std::max(static_cast<double>(p(y)), 1e-300));
      Eigen::Index best = 0;
      p.maxCoeff(&best);
      truth.push_back(ex.label);
      pred.push_back(label_at(static_cast<std::size_t>(best)));
    }
    const double n = static_cast<double>(set.size());
    record.validation_loss = loss / n;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == pred[i] ? 1 : 0;
    record.validation_accuracy = static_cast<double>(correct) / n;
    record.validation_f1 = eval::weighted_prf(truth, pred).f1;
  }

  std::unique_ptr<nn::TransformerEncoder<T>> encoder_;
  std::unique_ptr<nn::Tokenizer> tokenizer_;
  nlohmann::json encoder_meta_;
  std::shared_ptr<const nn::StaticEmbeddings> embeddings_;
  std::unique_ptr<Head<T>> head_;
};

// Encoder metadata and weights for a fresh model.
std::pair<std::optional<nn::Archive>, nlohmann::json> encoder_source(const ModelConfig& cfg) {
  if (!uses_encoder(cfg.architecture)) return {std::nullopt, nlohmann::json::object()};
  if (cfg.encoder_name == "mock") {
    return {std::nullopt,
            {{"config", nn::to_json(mock_encoder_config())},
             {"tokenizer", nn::HashTokenizer(mock_encoder_config().vocab_size).to_json()},
             {"source", "mock"}}};
  }
  nn::Archive archive = nn::read_archive(resolve_model_file(cfg.encoder_name));
  if (!archive.meta.contains("config") || !archive.meta.contains("tokenizer")) {
    fail(ErrorCode::kModelLoad, cfg.encoder_name + " is not an encoder export");
  }
  nlohmann::json meta = {{"config", archive.meta["config"]},
                         {"tokenizer", archive.meta["tokenizer"]},
                         {"source", archive.meta.value("source", cfg.encoder_name)}};
  return {std::move(archive), std::move(meta)};
}

std::shared_ptr<ModelImpl> build(const ModelConfig& cfg, const nn::Archive* archive, nlohmann::json meta) {
  if (cfg.precision == Precision::kDouble) return std::make_shared<Classifier<double>>(cfg, archive, std::move(meta));
  return std::make_shared<Classifier<float>>(cfg, archive, std::move(meta));
}

}  // namespace

Model Model::create(const ModelConfig& config) {
  config.validate();
  auto [archive, meta] = encoder_source(config);
  return Model(build(config, archive ? &*archive : nullptr, std::move(meta)));
}

void Model::save(const std::filesystem::path& path) const {
  nn::Archive archive;
  archive.meta["format"] = kCheckpointFormat;
  archive.meta["config"] = to_json(impl_->config);
  auto order = nlohmann::json::array();
  for (ClassLabel label : kLabelOrder) order.push_back(to_code(label));
  archive.meta["label_order"] = order;
  archive.meta["history"] = to_json(impl_->history);
  impl_->store(archive);
  nn::write_archive(path, archive);
}

Model Model::load(const std::filesystem::path& path) {
  const nn::Archive archive = nn::read_archive(path);
  if (archive.meta.value("format", "") != kCheckpointFormat) {
    fail(ErrorCode::kModelLoad, path.string() + " is not a stancekit model checkpoint");
  }
  auto order = nlohmann::json::array();
  for (ClassLabel label : kLabelOrder) order.push_back(to_code(label));
  if (archive.meta.value("label_order", nlohmann::json()) != order) {
    fail(ErrorCode::kModelLoad, "checkpoint label order differs from " + order.dump());
  }
  const ModelConfig config = model_config_from_json(archive.meta.at("config"));
  auto impl = build(config, nullptr, archive.meta.value("encoder", nlohmann::json::object()));
  impl->restore(archive);
  impl->history = history_from_json(archive.meta.value("history", nlohmann::json::array()));
  return Model(std::move(impl));
}

const History& Model::fit(std::span<const LabeledText> train, std::span<const LabeledText> validation,
                          const EpochCallback& on_epoch) {
  impl_->fit(train, validation, on_epoch);
  return impl_->history;
}

Input Model::prepare(std::string_view text) const { return impl_->prepare(text); }

eval::ScoreRow Model::logits(const Input& input) const { return impl_->logits(input); }

eval::ScoreRow Model::probabilities(std::string_view text) const {
  return softmax_row(impl_->logits(impl_->prepare(text)));
}

std::vector<eval::Prediction> Model::predict(std::span<const TextItem> items, unsigned threads) const {
  std::vector<eval::Prediction> out(items.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      eval::Prediction& p = out[i];
      p.tweet_id = items[i].id;
      try {
        p.probs = probabilities(items[i].text);
        p.label = label_at(argmax(p.probs));
      } catch (const Error& e) {
        p.error = std::string(to_string(e.code())) + ": " + e.what();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(items.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

const ModelConfig& Model::config() const { return impl_->config; }
const History& Model::history() const { return impl_->history; }
const std::vector<std::string>& Model::skipped_ids() const { return impl_->skipped; }
std::size_t Model::parameter_count() const { return impl_->parameter_count(); }
std::vector<std::pair<std::string, nn::Matrix<double>>> Model::parameter_values() const {
  return impl_->parameter_values();
}

Model train(const ModelConfig& config, std::span<const LabeledText> train_set,
            std::span<const LabeledText> validation) {
  Model model = Model::create(config);
  model.fit(train_set, validation);
  return model;
}

std::vector<LabeledText> labeled(std::span<const annotation::GoldExample> gold) {
  std::vector<LabeledText> out;
  for (const auto& g : gold) {
    if (g.excluded || !g.label) continue;
    out.push_back({g.tweet_id, g.text, *g.label});
  }
  return out;
}

HeldOut hold_out_validation(std::vector<LabeledText> train_set, const ModelConfig& config, std::uint64_t stream) {
  HeldOut out;
  if (uses_encoder(config.architecture) || config.patience == 0) {
    out.train = std::move(train_set);
    return out;
  }
  Rng rng = Rng::derive(config.seed, stream);
  PerClass<std::vector<LabeledText>> by_class;
  for (auto& ex : train_set) by_class[ex.label].push_back(std::move(ex));
  for (auto& members : by_class) {
    rng.shuffle(std::span<LabeledText>(members));
    const auto n_val = static_cast<std::size_t>(std::floor(0.15 * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < members.size(); ++i) {
      (i < n_val ? out.validation : out.train).push_back(std::move(members[i]));
    }
  }
  return out;
}

eval::CvResult cross_validate_model(const ModelConfig& config, std::span<const annotation::GoldExample> gold,
                                    std::span<const std::vector<std::string>> folds, unsigned threads) {
  auto runner = [&](std::span<const annotation::GoldExample> train_gold,
                    std::span<const annotation::GoldExample> test_gold, std::size_t fold) {
    HeldOut sets = hold_out_validation(labeled(train_gold), config, 100 + fold);
    Model model = train(config, sets.train, sets.validation);
    std::vector<TextItem> items;
    for (const auto& g : test_gold) items.push_back({g.tweet_id, g.text});
    return model.predict(items, threads);
  };
  return eval::cross_validate(gold, folds, runner);
}

}  // namespace stancekit::models
