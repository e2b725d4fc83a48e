#pragma once

#include <memory>
#include <vector>

#include "stancekit/labels.hpp"
#include "stancekit/models/config.hpp"
#include "stancekit/nn/layers.hpp"

namespace stancekit::models {

using nn::Mask;
using nn::Matrix;
using nn::RowVector;

struct HeadCache {
  virtual ~HeadCache() = default;
};

// Maps per-layer token states to 5 logits in kLabelOrder.
//
// `layers` is the featurizer output: the embedding matrix for static
// models, or the embedding output plus every encoder layer for
// transformers. All matrices share the row count of `mask`; positions with
// mask 0 never influence the logits.
template <typename T>
class Head {
 public:
  virtual ~Head() = default;

  virtual std::unique_ptr<HeadCache> make_cache() const = 0;
  // Dropout is applied only when `dropout_rng` is non-null.
  virtual RowVector<T> forward(const std::vector<Matrix<T>>& layers, const Mask& mask, HeadCache* cache,
                               Rng* dropout_rng) const = 0;
  // Accumulates parameter gradients. When `dlayers` is non-null it must
  // hold zero matrices shaped like `layers`; input gradients are added.
  virtual void backward(const HeadCache& cache, const RowVector<T>& dlogits, std::vector<Matrix<T>>* dlayers) = 0;
  virtual void init(Rng& rng) = 0;
  virtual void parameters(nn::ParamRefs<T>& out) = 0;
};

// Conv (window 3) + masked max-pool over the final encoder layer, dropout,
// fully connected.
template <typename T>
class CnnFinalHead : public Head<T> {
 public:
  CnnFinalHead(std::size_t hidden, std::size_t filters, double dropout);

  std::unique_ptr<HeadCache> make_cache() const override;
  RowVector<T> forward(const std::vector<Matrix<T>>& layers, const Mask& mask, HeadCache* cache,
                       Rng* dropout_rng) const override;
  void backward(const HeadCache& cache, const RowVector<T>& dlogits, std::vector<Matrix<T>>* dlayers) override;
  void init(Rng& rng) override;
  void parameters(nn::ParamRefs<T>& out) override;

  nn::Conv1dMaxPool<T> conv;
  nn::Linear<T> classifier;

 private:
  double dropout_;
};

// The same convolution applied to every layer, pooled vectors
// concatenated in layer order, dropout, fully connected.
template <typename T>
class CnnLayerwiseHead : public Head<T> {
 public:
  CnnLayerwiseHead(std::size_t hidden, std::size_t num_layers, std::size_t filters, double dropout);

  std::unique_ptr<HeadCache> make_cache() const override;
  RowVector<T> forward(const std::vector<Matrix<T>>& layers, const Mask& mask, HeadCache* cache,
                       Rng* dropout_rng) const override;
  void backward(const HeadCache& cache, const RowVector<T>& dlogits, std::vector<Matrix<T>>* dlayers) override;
  void init(Rng& rng) override;
  void parameters(nn::ParamRefs<T>& out) override;

  nn::Conv1dMaxPool<T> conv;
  nn::Linear<T> classifier;

 private:
  std::size_t num_layers_;
  double dropout_;
};

// Sequence classification from the first token of the final layer:
// dense + tanh pooler, dropout, fully connected.
template <typename T>
class SequenceClassificationHead : public Head<T> {
 public:
  SequenceClassificationHead(std::size_t hidden, double dropout);

  std::unique_ptr<HeadCache> make_cache() const override;
  RowVector<T> forward(const std::vector<Matrix<T>>& layers, const Mask& mask, HeadCache* cache,
                       Rng* dropout_rng) const override;
  void backward(const HeadCache& cache, const RowVector<T>& dlogits, std::vector<Matrix<T>>* dlayers) override;
  void init(Rng& rng) override;
  void parameters(nn::ParamRefs<T>& out) override;

  nn::Linear<T> pooler;
  nn::Linear<T> classifier;

 private:
  double dropout_;
};

// Convolutions of widths 3, 4 and 5 over word vectors, masked max-pool,
// dense ReLU layer, dropout, fully connected. A width longer than the
// active span contributes zeros.
template <typename T>
class CnnEmbedHead : public Head<T> {
 public:
  CnnEmbedHead(std::size_t dim, std::size_t filters, std::size_t hidden, double dropout);

  std::unique_ptr<HeadCache> make_cache() const override;
  RowVector<T> forward(const std::vector<Matrix<T>>& layers, const Mask& mask, HeadCache* cache,
                       Rng* dropout_rng) const override;
  void backward(const HeadCache& cache, const RowVector<T>& dlogits, std::vector<Matrix<T>>* dlayers) override;
  void init(Rng& rng) override;
  void parameters(nn::ParamRefs<T>& out) override;

  std::vector<nn::Conv1dMaxPool<T>> convs;
  nn::Linear<T> dense;
  nn::Linear<T> classifier;

 private:
  std::size_t dim_;
  double dropout_;
};

// Forward and backward LSTMs over the active positions; the two final
// states are concatenated, then dropout and fully connected.
template <typename T>
class BiLstmHead : public Head<T> {
 public:
  BiLstmHead(std::size_t dim, std::size_t hidden, double dropout);

  std::unique_ptr<HeadCache> make_cache() const override;
  RowVector<T> forward(const std::vector<Matrix<T>>& layers, const Mask& mask, HeadCache* cache,
                       Rng* dropout_rng) const override;
  void backward(const HeadCache& cache, const RowVector<T>& dlogits, std::vector<Matrix<T>>* dlayers) override;
  void init(Rng& rng) override;
  void parameters(nn::ParamRefs<T>& out) override;

  nn::Lstm<T> forward_lstm;
  nn::Lstm<T> backward_lstm;
  nn::Linear<T> classifier;

 private:
  std::size_t dim_;
  double dropout_;
};

// Minimum active positions for the BERT+CNN heads.
inline constexpr std::size_t kMinActivePositions = 3;

// Head for `config`; `input_dim` is the featurizer width and `num_layers`
// the number of state matrices it emits.
template <typename T>
std::unique_ptr<Head<T>> make_head(const ModelConfig& config, std::size_t input_dim, std::size_t num_layers);

}  // namespace stancekit::models
