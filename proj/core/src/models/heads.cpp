#include "stancekit/models/heads.hpp"

#include <cmath>

#include "stancekit/error.hpp"

namespace stancekit::models {
namespace {

template <typename T>
std::size_t check_inputs(const std::vector<Matrix<T>>& layers, const Mask& mask, std::size_t dim,
                         std::size_t expected_layers) {
  if (layers.empty()) fail(ErrorCode::kValidation, "head received no input states");
  if (expected_layers && layers.size() != expected_layers) {
    fail(ErrorCode::kConfig, "head expects " + std::to_string(expected_layers) + " layers, got " +
                                 std::to_string(layers.size()));
  }
  for (const auto& m : layers) {
    if (static_cast<std::size_t>(m.cols()) != dim) {
      fail(ErrorCode::kConfig, "input dimension " + std::to_string(m.cols()) + " differs from the expected " +
                                   std::to_string(dim));
    }
    if (static_cast<std::size_t>(m.rows()) != mask.size()) {
      fail(ErrorCode::kValidation, "mask length differs from the number of positions");
    }
  }
  std::size_t active = 0;
  for (auto m : mask) active += m ? 1 : 0;
  return active;
}

void require_active(std::size_t active, std::size_t needed) {
  if (active < needed) {
    fail(ErrorCode::kInputTooShort, "input has " + std::to_string(active) + " active positions, at least " +
                                        std::to_string(needed) + " required");
  }
}

// Inverted dropout mask, or an empty matrix meaning "no dropout".
template <typename T>
Matrix<T> maybe_dropout(Eigen::Index n, double p, Rng* rng) {
  if (!rng || p <= 0.0) return {};
  return nn::dropout_mask<T>(1, n, p, *rng);
}

template <typename T>
RowVector<T> apply(const RowVector<T>& x, const Matrix<T>& drop) {
  if (drop.size() == 0) return x;
  return x.cwiseProduct(RowVector<T>(drop.row(0)));
}

template <typename T>
std::optional<RowVector<T>> pool(const nn::Conv1dMaxPool<T>& conv, const Matrix<T>& x, const Mask& mask,
                                 typename nn::Conv1dMaxPool<T>::Cache* cache) {
  return conv.forward(x, mask, cache);
}

[[noreturn]] void no_window(std::size_t width) {
  fail(ErrorCode::kInputTooShort, "no run of " + std::to_string(width) + " consecutive active positions");
}

// He initialization for layers followed by ReLU.
double he(std::size_t fan_in) { return std::sqrt(2.0 / static_cast<double>(fan_in)); }

constexpr double kPoolerInitStd = 0.02;

// Final classifiers start at zero so an untrained model predicts the
// uniform distribution; gradients still reach every layer from the
// second update on.
template <typename T>
void zero_init(nn::Linear<T>& layer) {
  layer.weight.value.setZero();
  layer.bias.value.setZero();
}

}  // namespace

// --- bert_cnn_final -------------------------------------------------------

namespace {
template <typename T>
struct CnnFinalCache : HeadCache {
  typename nn::Conv1dMaxPool<T>::Cache conv;
  Matrix<T> drop;
  RowVector<T> hidden;
};
}  // namespace

template <typename T>
CnnFinalHead<T>::CnnFinalHead(std::size_t hidden, std::size_t filters, double dropout)
    : conv("head.conv", static_cast<Eigen::Index>(hidden), 3, static_cast<Eigen::Index>(filters)),
      classifier("head.classifier", static_cast<Eigen::Index>(filters), kNumClasses),
      dropout_(dropout) {}

template <typename T>
std::unique_ptr<HeadCache> CnnFinalHead<T>::make_cache() const {
  return std::make_unique<CnnFinalCache<T>>();
}

template <typename T>
RowVector<T> CnnFinalHead<T>::forward(const std::vector<Matrix<T>>& layers, const Mask& mask, HeadCache* cache,
                                      Rng* dropout_rng) const {
  const auto active = check_inputs(layers, mask, static_cast<std::size_t>(conv.weight.value.cols() / 3), 0);
  require_active(active, kMinActivePositions);
  auto* c = static_cast<CnnFinalCache<T>*>(cache);
  const auto pooled = pool(conv, layers.back(), mask, c ? &c->conv : nullptr);
  if (!pooled) no_window(3);
  Matrix<T> drop = maybe_dropout<T>(pooled->size(), dropout_, dropout_rng);
  RowVector<T> h = apply(*pooled, drop);
  RowVector<T> logits = classifier.forward(h);
  if (c) {
    c->drop = std::move(drop);
    c->hidden = std::move(h);
  }
  return logits;
}

template <typename T>
void CnnFinalHead<T>::backward(const HeadCache& cache, const RowVector<T>& dlogits,
                               std::vector<Matrix<T>>* dlayers) {
  const auto& c = static_cast<const CnnFinalCache<T>&>(cache);
  const RowVector<T> dh = classifier.backward(c.hidden, dlogits);
  conv.backward(c.conv, apply(dh, c.drop), dlayers ? &dlayers->back() : nullptr);
}

template <typename T>
void CnnFinalHead<T>::init(Rng& rng) {
  conv.init(rng, he(static_cast<std::size_t>(conv.weight.value.cols())));
  zero_init(classifier);
}

template <typename T>
void CnnFinalHead<T>::parameters(nn::ParamRefs<T>& out) {
  conv.parameters(out);
  classifier.parameters(out);
}

// --- bert_cnn_layerwise ---------------------------------------------------

namespace {
template <typename T>
struct CnnLayerwiseCache : HeadCache {
  std::vector<typename nn::Conv1dMaxPool<T>::Cache> conv;
  Matrix<T> drop;
  RowVector<T> hidden;
};
}  // namespace

template <typename T>
CnnLayerwiseHead<T>::CnnLayerwiseHead(std::size_t hidden, std::size_t num_layers, std::size_t filters,
                                      double dropout)
    : conv("head.conv", static_cast<Eigen::Index>(hidden), 3, static_cast<Eigen::Index>(filters)),
      classifier("head.classifier", static_cast<Eigen::Index>(filters * num_layers), kNumClasses),
      num_layers_(num_layers),
      dropout_(dropout) {}

template <typename T>
std::unique_ptr<HeadCache> CnnLayerwiseHead<T>::make_cache() const {
  return std::make_unique<CnnLayerwiseCache<T>>();
}

template <typename T>
RowVector<T> CnnLayerwiseHead<T>::forward(const std::vector<Matrix<T>>& layers, const Mask& mask,
                                          HeadCache* cache, Rng* dropout_rng) const {
  const auto active =
      check_inputs(layers, mask, static_cast<std::size_t>(conv.weight.value.cols() / 3), num_layers_);
  require_active(active, kMinActivePositions);
  auto* c = static_cast<CnnLayerwiseCache<T>*>(cache);
  if (c) c->conv.resize(num_layers_);
  const Eigen::Index f = conv.filters();
  RowVector<T> concat(f * static_cast<Eigen::Index>(num_layers_));
  for (std::size_t l = 0; l < num_layers_; ++l) {
    const auto pooled = pool(conv, layers[l], mask, c ? &c->conv[l] : nullptr);
    if (!pooled) no_window(3);
    concat.segment(static_cast<Eigen::Index>(l) * f, f) = *pooled;
  }
  Matrix<T> drop = maybe_dropout<T>(concat.size(), dropout_, dropout_rng);
  RowVector<T> h = apply(concat, drop);
  RowVector<T> logits = classifier.forward(h);
  if (c) {
    c->drop = std::move(drop);
    c->hidden = std::move(h);
  }
  return logits;
}

template <typename T>
void CnnLayerwiseHead<T>::backward(const HeadCache& cache, const RowVector<T>& dlogits,
                                   std::vector<Matrix<T>>* dlayers) {
  const auto& c = static_cast<const CnnLayerwiseCache<T>&>(cache);
  const RowVector<T> dconcat = apply(RowVector<T>(classifier.backward(c.hidden, dlogits)), c.drop);
  const Eigen::Index f = conv.filters();
  for (std::size_t l = 0; l < num_layers_; ++l) {
    const RowVector<T> dpooled = dconcat.segment(static_cast<Eigen::Index>(l) * f, f);
    conv.backward(c.conv[l], dpooled, dlayers ? &(*dlayers)[l] : nullptr);
  }
}

template <typename T>
void CnnLayerwiseHead<T>::init(Rng& rng) {
  conv.init(rng, he(static_cast<std::size_t>(conv.weight.value.cols())));
  zero_init(classifier);
}

template <typename T>
void CnnLayerwiseHead<T>::parameters(nn::ParamRefs<T>& out) {
  conv.parameters(out);
  classifier.parameters(out);
}

// --- bert / roberta sequence classification ------------------------------

namespace {
template <typename T>
struct SeqClsCache : HeadCache {
  RowVector<T> cls;
  RowVector<T> pooled;  // tanh output
  Matrix<T> drop;
  RowVector<T> hidden;
};
}  // namespace

template <typename T>
SequenceClassificationHead<T>::SequenceClassificationHead(std::size_t hidden, double dropout)
    : pooler("pooler.dense", static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(hidden)),
      classifier("head.classifier", static_cast<Eigen::Index>(hidden), kNumClasses),
      dropout_(dropout) {}

template <typename T>
std::unique_ptr<HeadCache> SequenceClassificationHead<T>::make_cache() const {
  return std::make_unique<SeqClsCache<T>>();
}

template <typename T>
RowVector<T> SequenceClassificationHead<T>::forward(const std::vector<Matrix<T>>& layers, const Mask& mask,
                                                    HeadCache* cache, Rng* dropout_rng) const {
  check_inputs(layers, mask, static_cast<std::size_t>(pooler.weight.value.cols()), 0);
  if (mask.empty() || !mask[0]) fail(ErrorCode::kInputTooShort, "first position must be active");
  RowVector<T> cls = layers.back().row(0);
  RowVector<T> pooled = pooler.forward(cls).unaryExpr([](T v) { return std::tanh(v); });
  Matrix<T> drop = maybe_dropout<T>(pooled.size(), dropout_, dropout_rng);
  RowVector<T> h = apply(pooled, drop);
  RowVector<T> logits = classifier.forward(h);
  if (auto* c = static_cast<SeqClsCache<T>*>(cache)) {
    c->cls = std::move(cls);
    c->pooled = std::move(pooled);
    c->drop = std::move(drop);
    c->hidden = std::move(h);
  }
  return logits;
}

template <typename T>
void SequenceClassificationHead<T>::backward(const HeadCache& cache, const RowVector<T>& dlogits,
                                             std::vector<Matrix<T>>* dlayers) {
  const auto& c = static_cast<const SeqClsCache<T>&>(cache);
  const RowVector<T> dpooled = apply(RowVector<T>(classifier.backward(c.hidden, dlogits)), c.drop);
  const RowVector<T> dz = dpooled.cwiseProduct((T(1) - c.pooled.array().square()).matrix());
  const RowVector<T> dcls = pooler.backward(c.cls, dz);
  if (dlayers) dlayers->back().row(0) += dcls;
}

template <typename T>
void SequenceClassificationHead<T>::init(Rng& rng) {
  pooler.init(rng, kPoolerInitStd);
  zero_init(classifier);
}

template <typename T>
void SequenceClassificationHead<T>::parameters(nn::ParamRefs<T>& out) {
  pooler.parameters(out);
  classifier.parameters(out);
}

// --- cnn_embed --------------------------------------------------------------

namespace {
constexpr Eigen::Index kEmbedWidths[] = {3, 4, 5};

template <typename T>
struct CnnEmbedCache : HeadCache {
  std::vector<typename nn::Conv1dMaxPool<T>::Cache> conv;
  std::vector<bool> valid;
  RowVector<T> concat;
  Matrix<T> dense_out;  // after ReLU
  Matrix<T> drop;
  RowVector<T> hidden;
};
}  // namespace

template <typename T>
CnnEmbedHead<T>::CnnEmbedHead(std::size_t dim, std::size_t filters, std::size_t hidden, double dropout)
    : dense("head.dense", static_cast<Eigen::Index>(filters * std::size(kEmbedWidths)),
            static_cast<Eigen::Index>(hidden)),
      classifier("head.classifier", static_cast<Eigen::Index>(hidden), kNumClasses),
      dim_(dim),
      dropout_(dropout) {
  for (Eigen::Index w : kEmbedWidths) {
    convs.emplace_back("head.conv" + std::to_string(w), static_cast<Eigen::Index>(dim), w,
                       static_cast<Eigen::Index>(filters));
  }
}

template <typename T>
std::unique_ptr<HeadCache> CnnEmbedHead<T>::make_cache() const {
  return std::make_unique<CnnEmbedCache<T>>();
}

template <typename T>
RowVector<T> CnnEmbedHead<T>::forward(const std::vector<Matrix<T>>& layers, const Mask& mask, HeadCache* cache,
                                      Rng* dropout_rng) const {
  require_active(check_inputs(layers, mask, dim_, 1), 1);
  auto* c = static_cast<CnnEmbedCache<T>*>(cache);
  if (c) {
    c->conv.assign(convs.size(), {});
    c->valid.assign(convs.size(), false);
  }
  const Eigen::Index f = convs.front().filters();
  RowVector<T> concat = RowVector<T>::Zero(f * static_cast<Eigen::Index>(convs.size()));
  for (std::size_t k = 0; k < convs.size(); ++k) {
    const auto pooled = pool(convs[k], layers[0], mask, c ? &c->conv[k] : nullptr);
    if (!pooled) continue;
    concat.segment(static_cast<Eigen::Index>(k) * f, f) = *pooled;
    if (c) c->valid[k] = true;
  }
  Matrix<T> dense_out = dense.forward(concat).cwiseMax(T(0));
  Matrix<T> drop = maybe_dropout<T>(dense_out.cols(), dropout_, dropout_rng);
  RowVector<T> h = apply(RowVector<T>(dense_out.row(0)), drop);
  RowVector<T> logits = classifier.forward(h);
  if (c) {
    c->concat = std::move(concat);
    c->dense_out = std::move(dense_out);
    c->drop = std::move(drop);
    c->hidden = std::move(h);
  }
  return logits;
}

template <typename T>
void CnnEmbedHead<T>::backward(const HeadCache& cache, const RowVector<T>& dlogits,
                               std::vector<Matrix<T>>* dlayers) {
  const auto& c = static_cast<const CnnEmbedCache<T>&>(cache);
  RowVector<T> dh = apply(RowVector<T>(classifier.backward(c.hidden, dlogits)), c.drop);
  for (Eigen::Index i = 0; i < dh.size(); ++i) {
    if (c.dense_out(0, i) <= T(0)) dh(i) = T(0);
  }
  const RowVector<T> dconcat = dense.backward(c.concat, dh);
  const Eigen::Index f = convs.front().filters();
  for (std::size_t k = 0; k < convs.size(); ++k) {
    if (!c.valid[k]) continue;
    const RowVector<T> dpooled = dconcat.segment(static_cast<Eigen::Index>(k) * f, f);
    convs[k].backward(c.conv[k], dpooled, dlayers ? &(*dlayers)[0] : nullptr);
  }
}

template <typename T>
void CnnEmbedHead<T>::init(Rng& rng) {
  for (auto& conv : convs) conv.init(rng, he(static_cast<std::size_t>(conv.weight.value.cols())));
  dense.init(rng, he(static_cast<std::size_t>(dense.weight.value.cols())));
  zero_init(classifier);
}

template <typename T>
void CnnEmbedHead<T>::parameters(nn::ParamRefs<T>& out) {
  for (auto& conv : convs) conv.parameters(out);
  dense.parameters(out);
  classifier.parameters(out);
}

// --- bilstm_embed -----------------------------------------------------------

namespace {
template <typename T>
struct BiLstmCache : HeadCache {
  std::vector<Eigen::Index> positions;  // active rows in order
  typename nn::Lstm<T>::Cache fwd, bwd;
  Matrix<T> drop;
  RowVector<T> hidden;
};
}  // namespace

template <typename T>
BiLstmHead<T>::BiLstmHead(std::size_t dim, std::size_t hidden, double dropout)
    : forward_lstm("head.lstm_forward", static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(hidden)),
      backward_lstm("head.lstm_backward", static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(hidden)),
      classifier("head.classifier", static_cast<Eigen::Index>(2 * hidden), kNumClasses),
      dim_(dim),
      dropout_(dropout) {}

template <typename T>
std::unique_ptr<HeadCache> BiLstmHead<T>::make_cache() const {
  return std::make_unique<BiLstmCache<T>>();
}

template <typename T>
RowVector<T> BiLstmHead<T>::forward(const std::vector<Matrix<T>>& layers, const Mask& mask, HeadCache* cache,
                                    Rng* dropout_rng) const {
  const auto active = check_inputs(layers, mask, dim_, 1);
  require_active(active, 1);
  const Matrix<T>& x = layers[0];
  std::vector<Eigen::Index> positions;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) positions.push_back(static_cast<Eigen::Index>(i));
  }
  const auto n = static_cast<Eigen::Index>(positions.size());
  Matrix<T> xf(n, x.cols()), xb(n, x.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    xf.row(i) = x.row(positions[static_cast<std::size_t>(i)]);
    xb.row(n - 1 - i) = xf.row(i);
  }
  auto* c = static_cast<BiLstmCache<T>*>(cache);
  const RowVector<T> hf = forward_lstm.forward(xf, c ? &c->fwd : nullptr);
  const RowVector<T> hb = backward_lstm.forward(xb, c ? &c->bwd : nullptr);
  const Eigen::Index h = forward_lstm.hidden();
  RowVector<T> concat(2 * h);
  concat << hf, hb;
  Matrix<T> drop = maybe_dropout<T>(concat.size(), dropout_, dropout_rng);
  RowVector<T> hidden = apply(concat, drop);
  RowVector<T> logits = classifier.forward(hidden);
  if (c) {
    c->positions = std::move(positions);
    c->drop = std::move(drop);
    c->hidden = std::move(hidden);
  }
  return logits;
}

template <typename T>
void BiLstmHead<T>::backward(const HeadCache& cache, const RowVector<T>& dlogits,
                             std::vector<Matrix<T>>* dlayers) {
  const auto& c = static_cast<const BiLstmCache<T>&>(cache);
  const RowVector<T> dconcat = apply(RowVector<T>(classifier.backward(c.hidden, dlogits)), c.drop);
  const Eigen::Index h = forward_lstm.hidden();
  const Matrix<T> dxf = forward_lstm.backward(c.fwd, dconcat.segment(0, h));
  const Matrix<T> dxb = backward_lstm.backward(c.bwd, dconcat.segment(h, h));
  if (!dlayers) return;
  const auto n = static_cast<Eigen::Index>(c.positions.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    (*dlayers)[0].row(c.positions[static_cast<std::size_t>(i)]) += dxf.row(i) + dxb.row(n - 1 - i);
  }
}

template <typename T>
void BiLstmHead<T>::init(Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(forward_lstm.hidden()));
  forward_lstm.init(rng, s);
  backward_lstm.init(rng, s);
  zero_init(classifier);
}

template <typename T>
void BiLstmHead<T>::parameters(nn::ParamRefs<T>& out) {
  forward_lstm.parameters(out);
  backward_lstm.parameters(out);
  classifier.parameters(out);
}

template <typename T>
std::unique_ptr<Head<T>> make_head(const ModelConfig& config, std::size_t input_dim, std::size_t num_layers) {
  switch (config.architecture) {
    case Architecture::kCnnEmbed:
    case Architecture::kBilstmEmbed:
      if (input_dim != config.embedding_dim) {
        fail(ErrorCode::kConfig, "embeddings have dimension " + std::to_string(input_dim) + ", model expects " +
                                     std::to_string(config.embedding_dim));
      }
      if (config.architecture == Architecture::kCnnEmbed) {
        return std::make_unique<CnnEmbedHead<T>>(input_dim, config.embed_filters, config.hidden, config.dropout);
      }
      return std::make_unique<BiLstmHead<T>>(input_dim, config.hidden, config.dropout);
    case Architecture::kBert:
    case Architecture::kRoberta:
      return std::make_unique<SequenceClassificationHead<T>>(input_dim, config.dropout);
    case Architecture::kBertCnnLayerwise:
      return std::make_unique<CnnLayerwiseHead<T>>(input_dim, num_layers, config.filters, config.dropout);
    case Architecture::kBertCnnFinal:
      return std::make_unique<CnnFinalHead<T>>(input_dim, config.filters, config.dropout);
  }
  fail(ErrorCode::kConfig, "unknown architecture");
}

#define STANCEKIT_INSTANTIATE(T)                       \
  template class CnnFinalHead<T>;                      \
  template class CnnLayerwiseHead<T>;                  \
  template class SequenceClassificationHead<T>;        \
  template class CnnEmbedHead<T>;                      \
  template class BiLstmHead<T>;                        \
  template std::unique_ptr<Head<T>> make_head<T>(const ModelConfig&, std::size_t, std::size_t);

STANCEKIT_INSTANTIATE(float)
STANCEKIT_INSTANTIATE(double)
#undef STANCEKIT_INSTANTIATE

}  // namespace stancekit::models
