#include "stancekit/nn/transformer.hpp"

#include <cmath>

#include "stancekit/error.hpp"

namespace stancekit::nn {

void TransformerConfig::validate() const {
  if (family != "bert" && family != "roberta") fail(ErrorCode::kConfig, "unknown encoder family " + family);
  if (hidden == 0 || layers == 0 || heads == 0 || vocab_size == 0 || max_positions == 0) {
    fail(ErrorCode::kConfig, "encoder dimensions must be positive");
  }
  if (hidden % heads != 0) fail(ErrorCode::kConfig, "hidden size must be divisible by the head count");
}

nlohmann::json to_json(const TransformerConfig& c) {
  return {{"family", c.family},         {"vocab_size", c.vocab_size},
          {"hidden", c.hidden},         {"layers", c.layers},
          {"heads", c.heads},           {"intermediate", c.intermediate},
          {"max_positions", c.max_positions}, {"type_vocab", c.type_vocab},
          {"position_offset", c.position_offset}, {"layer_norm_eps", c.layer_norm_eps}};
}

TransformerConfig transformer_config_from_json(const nlohmann::json& row) {
  TransformerConfig c;
  c.family = row.value("family", c.family);
  c.vocab_size = row.at("vocab_size").get<std::size_t>();
  c.hidden = row.at("hidden").get<std::size_t>();
  c.layers = row.at("layers").get<std::size_t>();
  c.heads = row.at("heads").get<std::size_t>();
  c.intermediate = row.at("intermediate").get<std::size_t>();
  c.max_positions = row.at("max_positions").get<std::size_t>();
  c.type_vocab = row.value("type_vocab", c.type_vocab);
  c.position_offset = row.value("position_offset", c.position_offset);
  c.layer_norm_eps = row.value("layer_norm_eps", c.layer_norm_eps);
  c.validate();
  return c;
}

template <typename T>
TransformerEncoder<T>::TransformerEncoder(TransformerConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto h = static_cast<Eigen::Index>(config_.hidden);
  const auto inter = static_cast<Eigen::Index>(config_.intermediate);
  word_embeddings_ = Param<T>("embeddings.word_embeddings.weight", static_cast<Eigen::Index>(config_.vocab_size), h);
  position_embeddings_ =
      Param<T>("embeddings.position_embeddings.weight", static_cast<Eigen::Index>(config_.max_positions), h);
  token_type_embeddings_ =
      Param<T>("embeddings.token_type_embeddings.weight", static_cast<Eigen::Index>(config_.type_vocab), h);
  ln_embeddings_ = LayerNorm<T>("embeddings.LayerNorm", h, config_.layer_norm_eps);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string p = "encoder.layer." + std::to_string(l) + ".";
    layers_.push_back(Layer{Linear<T>(p + "attention.self.query", h, h),
                            Linear<T>(p + "attention.self.key", h, h),
                            Linear<T>(p + "attention.self.value", h, h),
                            Linear<T>(p + "attention.output.dense", h, h),
                            LayerNorm<T>(p + "attention.output.LayerNorm", h, config_.layer_norm_eps),
                            Linear<T>(p + "intermediate.dense", h, inter),
                            Linear<T>(p + "output.dense", inter, h),
                            LayerNorm<T>(p + "output.LayerNorm", h, config_.layer_norm_eps)});
  }
}

template <typename T>
Matrix<T> TransformerEncoder<T>::layer_forward(const Layer& layer, const Matrix<T>& x,
                                               std::span<const std::uint8_t> mask, LayerCache* cache) const {
  const Eigen::Index len = x.rows();
  const Eigen::Index heads = static_cast<Eigen::Index>(config_.heads);
  const Eigen::Index dh = static_cast<Eigen::Index>(config_.hidden) / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  Matrix<T> q = layer.query.forward(x), k = layer.key.forward(x), v = layer.value.forward(x);
  RowVector<T> key_bias = RowVector<T>::Zero(len);
  for (Eigen::Index j = 0; j < len; ++j) {
    if (!mask.empty() && !mask[static_cast<std::size_t>(j)]) key_bias(j) = static_cast<T>(-1e30);
  }
  Matrix<T> context(len, x.cols());
  std::vector<Matrix<T>> probs;
  for (Eigen::Index hd = 0; hd < heads; ++hd) {
    Matrix<T> scores = (q.middleCols(hd * dh, dh) * k.middleCols(hd * dh, dh).transpose()) * scale;
    scores.rowwise() += key_bias;
    Matrix<T> p = softmax_rows<T>(scores);
    context.middleCols(hd * dh, dh).noalias() = p * v.middleCols(hd * dh, dh);
    if (cache) probs.push_back(std::move(p));
  }
  typename LayerNorm<T>::Cache ln1, ln2;
  Matrix<T> h1 = layer.ln_attention.forward(x + layer.attention_output.forward(context), cache ? &ln1 : nullptr);
  Matrix<T> pre = layer.intermediate.forward(h1);
  Matrix<T> act = gelu<T>(pre);
  Matrix<T> out = layer.ln_output.forward(h1 + layer.output.forward(act), cache ? &ln2 : nullptr);
  if (cache) {
    cache->x = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->context = std::move(context);
    cache->probs = std::move(probs);
    cache->ln_attention = std::move(ln1);
    cache->ln_output = std::move(ln2);
    cache->h1 = std::move(h1);
    cache->intermediate_pre = std::move(pre);
    cache->intermediate = std::move(act);
  }
  return out;
}

template <typename T>
Matrix<T> TransformerEncoder<T>::layer_backward(Layer& layer, const LayerCache& c, const Matrix<T>& dy) {
  const Eigen::Index heads = static_cast<Eigen::Index>(config_.heads);
  const Eigen::Index dh = static_cast<Eigen::Index>(config_.hidden) / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  const Matrix<T> d_res2 = layer.ln_output.backward(c.ln_output, dy);
  const Matrix<T> d_act = layer.output.backward(c.intermediate, d_res2);
  const Matrix<T> d_pre = d_act.cwiseProduct(gelu_grad<T>(c.intermediate_pre));
  const Matrix<T> d_h1 = d_res2 + layer.intermediate.backward(c.h1, d_pre);
  const Matrix<T> d_res1 = layer.ln_attention.backward(c.ln_attention, d_h1);
  const Matrix<T> d_context = layer.attention_output.backward(c.context, d_res1);

  Matrix<T> dq(c.q.rows(), c.q.cols()), dk(c.k.rows(), c.k.cols()), dv(c.v.rows(), c.v.cols());
  for (Eigen::Index hd = 0; hd < heads; ++hd) {
    const Matrix<T>& p = c.probs[static_cast<std::size_t>(hd)];
    const Matrix<T> d_ctx = d_context.middleCols(hd * dh, dh);
    const Matrix<T> dp = d_ctx * c.v.middleCols(hd * dh, dh).transpose();
    dv.middleCols(hd * dh, dh).noalias() = p.transpose() * d_ctx;
    Matrix<T> ds = p.cwiseProduct(dp);
    const auto row_sums = ds.rowwise().sum().eval();
    ds -= (p.array().colwise() * row_sums.array()).matrix();
    ds *= scale;
    dq.middleCols(hd * dh, dh).noalias() = ds * c.k.middleCols(hd * dh, dh);
    dk.middleCols(hd * dh, dh).noalias() = ds.transpose() * c.q.middleCols(hd * dh, dh);
  }
  Matrix<T> dx = d_res1;
  dx += layer.query.backward(c.x, dq);
  dx += layer.key.backward(c.x, dk);
  dx += layer.value.backward(c.x, dv);
  return dx;
}

template <typename T>
std::vector<Matrix<T>> TransformerEncoder<T>::forward(std::span<const int> ids, std::span<const std::uint8_t> mask,
                                                      Cache* cache) const {
  const auto len = static_cast<Eigen::Index>(ids.size());
  if (ids.size() + config_.position_offset > config_.max_positions) {
    fail(ErrorCode::kValidation, "sequence of " + std::to_string(ids.size()) +
                                     " tokens exceeds the encoder's position table");
  }
  if (!mask.empty() && mask.size() != ids.size()) fail(ErrorCode::kValidation, "mask length differs from ids");
  Matrix<T> e(len, static_cast<Eigen::Index>(config_.hidden));
  for (Eigen::Index i = 0; i < len; ++i) {
    const int id = ids[static_cast<std::size_t>(i)];
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
      fail(ErrorCode::kValidation, "token id " + std::to_string(id) + " outside the vocabulary");
    }
    e.row(i) = word_embeddings_.value.row(id) +
               position_embeddings_.value.row(i + static_cast<Eigen::Index>(config_.position_offset)) +
               token_type_embeddings_.value.row(0);
  }
  std::vector<Matrix<T>> states;
  states.reserve(config_.layers + 1);
  if (cache) {
    cache->ids.assign(ids.begin(), ids.end());
    cache->layers.resize(config_.layers);
  }
  states.push_back(ln_embeddings_.forward(e, cache ? &cache->ln_embeddings : nullptr));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    states.push_back(layer_forward(layers_[l], states.back(), mask, cache ? &cache->layers[l] : nullptr));
  }
  return states;
}

template <typename T>
void TransformerEncoder<T>::backward(const Cache& cache, const std::vector<Matrix<T>>& d_states) {
  if (!trainable_) return;
  Matrix<T> g = d_states.back();
  for (std::size_t l = layers_.size(); l-- > 0;) {
    g = layer_backward(layers_[l], cache.layers[l], g);
    g += d_states[l];
  }
  const Matrix<T> de = ln_embeddings_.backward(cache.ln_embeddings, g);
  for (Eigen::Index i = 0; i < de.rows(); ++i) {
    word_embeddings_.grad.row(cache.ids[static_cast<std::size_t>(i)]) += de.row(i);
    position_embeddings_.grad.row(i + static_cast<Eigen::Index>(config_.position_offset)) += de.row(i);
  }
  token_type_embeddings_.grad.row(0) += de.colwise().sum();
}

template <typename T>
void TransformerEncoder<T>::init(Rng& rng, double stddev) {
  init_normal(word_embeddings_, rng, stddev);
  init_normal(position_embeddings_, rng, stddev);
  init_normal(token_type_embeddings_, rng, stddev);
  for (auto& layer : layers_) {
    for (Linear<T>* lin : {&layer.query, &layer.key, &layer.value, &layer.attention_output, &layer.intermediate,
                           &layer.output}) {
      lin->init(rng, stddev);
    }
  }
}

template <typename T>
void TransformerEncoder<T>::parameters(ParamRefs<T>& out) {
  out.push_back(&word_embeddings_);
  out.push_back(&position_embeddings_);
  out.push_back(&token_type_embeddings_);
  ln_embeddings_.parameters(out);
  for (auto& layer : layers_) {
    layer.query.parameters(out);
    layer.key.parameters(out);
    layer.value.parameters(out);
    layer.attention_output.parameters(out);
    layer.ln_attention.parameters(out);
    layer.intermediate.parameters(out);
    layer.output.parameters(out);
    layer.ln_output.parameters(out);
  }
}

template <typename T>
void TransformerEncoder<T>::set_trainable(bool trainable) {
  trainable_ = trainable;
  ParamRefs<T> params;
  parameters(params);
  for (auto* p : params) p->trainable = trainable;
}

template class TransformerEncoder<float>;
template class TransformerEncoder<double>;

}  // namespace stancekit::nn
