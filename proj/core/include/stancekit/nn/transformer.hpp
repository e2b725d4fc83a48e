#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stancekit/nn/layers.hpp"

namespace stancekit::nn {

// BERT-family encoder hyperparameters. Parameter names follow the
// Hugging Face state-dict layout without the model prefix.
struct TransformerConfig {
  std::string family = "bert";  // "bert" or "roberta"
  std::size_t vocab_size = 30522;
  std::size_t hidden = 768;
  std::size_t layers = 12;
  std::size_t heads = 12;
  std::size_t intermediate = 3072;
  std::size_t max_positions = 512;
  std::size_t type_vocab = 2;
  std::size_t position_offset = 0;  // RoBERTa numbers positions from padding_idx + 1
  double layer_norm_eps = 1e-12;

  void validate() const;
};

nlohmann::json to_json(const TransformerConfig& config);
TransformerConfig transformer_config_from_json(const nlohmann::json& row);

template <typename T>
class TransformerEncoder {
 public:
  struct LayerCache {
    Matrix<T> x, q, k, v, context;
    std::vector<Matrix<T>> probs;  // per head [L, L]
    typename LayerNorm<T>::Cache ln_attention, ln_output;
    Matrix<T> h1, intermediate_pre, intermediate;
  };
  struct Cache {
    std::vector<int> ids;
    typename LayerNorm<T>::Cache ln_embeddings;
    std::vector<LayerCache> layers;
  };

  explicit TransformerEncoder(TransformerConfig config);

  // Embedding output plus every layer output: [layers + 1] x [L, hidden].
  // Masked (0) positions are excluded as attention keys.
  std::vector<Matrix<T>> forward(std::span<const int> ids, std::span<const std::uint8_t> mask,
                                 Cache* cache) const;
  // `d_states` holds dL/d(state) for every returned state; accumulates
  // parameter gradients.
  void backward(const Cache& cache, const std::vector<Matrix<T>>& d_states);

  void init(Rng& rng, double stddev = 0.02);
  void parameters(ParamRefs<T>& out);
  void set_trainable(bool trainable);
  const TransformerConfig& config() const { return config_; }

 private:
  struct Layer {
    Linear<T> query, key, value, attention_output;
    LayerNorm<T> ln_attention;
    Linear<T> intermediate, output;
    LayerNorm<T> ln_output;
  };

  Matrix<T> layer_forward(const Layer& layer, const Matrix<T>& x, std::span<const std::uint8_t> mask,
                          LayerCache* cache) const;
  Matrix<T> layer_backward(Layer& layer, const LayerCache& cache, const Matrix<T>& dy);

  TransformerConfig config_;
  Param<T> word_embeddings_, position_embeddings_, token_type_embeddings_;
  LayerNorm<T> ln_embeddings_;
  std::vector<Layer> layers_;
  bool trainable_ = true;
};

}  // namespace stancekit::nn
