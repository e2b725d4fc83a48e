#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "stancekit/error.hpp"
#include "stancekit/models/heads.hpp"

namespace stancekit::models {
namespace {

using stancekit::testing::central_difference;
using MD = Matrix<double>;

template <typename T>
Matrix<T> random_states(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.normal());
  return m;
}

template <typename T>
std::vector<Matrix<T>> random_layers(std::size_t n, Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::vector<Matrix<T>> out;
  for (std::size_t l = 0; l < n; ++l) out.push_back(random_states<T>(rows, cols, rng));
  return out;
}

template <typename T>
std::unique_ptr<Head<T>> head_for(Architecture arch, std::size_t dim, std::size_t layers, std::size_t filters) {
  ModelConfig c = default_config(arch);
  c.filters = filters;
  c.embedding_dim = dim;
  c.embed_filters = 6;
  c.hidden = 7;
  return make_head<T>(c, dim, layers);
}

// Inputs for each architecture: (dim, layers).
std::pair<std::size_t, std::size_t> input_shape(Architecture arch) {
  switch (arch) {
    case Architecture::kCnnEmbed:
    case Architecture::kBilstmEmbed: return {300, 1};
    case Architecture::kBertCnnLayerwise: return {768, 13};
    default: return {768, 13};
  }
}

TEST(Heads, PaperShapesGiveFiveLogits) {
  Rng rng(1);
  CnnFinalHead<float> final_head(768, 256, 0.2);
  final_head.init(rng);
  const auto final_logits = final_head.forward({random_states<float>(256, 768, rng)}, Mask(256, 1), nullptr, nullptr);
  EXPECT_EQ(final_logits.size(), 5);

  CnnLayerwiseHead<float> layerwise(768, 13, 256, 0.2);
  layerwise.init(rng);
  const auto lw = layerwise.forward(random_layers<float>(13, 256, 768, rng), Mask(256, 1), nullptr, nullptr);
  EXPECT_EQ(lw.size(), 5);

  for (Architecture arch : {Architecture::kCnnEmbed, Architecture::kBilstmEmbed}) {
    auto head = head_for<float>(arch, 300, 1, 8);
    head->init(rng);
    EXPECT_EQ(head->forward({random_states<float>(40, 300, rng)}, Mask(40, 1), nullptr, nullptr).size(), 5);
  }
}

// Heads start with a zero classifier; tests that compare logits need a
// random one.
template <typename T>
void randomize_classifier(Head<T>& head, Rng& rng) {
  nn::ParamRefs<T> params;
  head.parameters(params);
  for (auto* p : params) {
    if (p->name.rfind("head.classifier", 0) == 0) nn::init_normal(*p, rng, 0.1);
  }
}

TEST(Heads, PaddingNeverChangesLogits) {
  Rng rng(2);
  for (Architecture arch : kAllArchitectures) {
    const auto [dim, layers] = input_shape(arch);
    auto head = head_for<float>(arch, dim, layers, 32);
    head->init(rng);
    randomize_classifier(*head, rng);
    for (int trial = 0; trial < 5; ++trial) {
      const auto len = static_cast<Eigen::Index>(3 + rng.below(12));
      const auto pad = static_cast<Eigen::Index>(1 + rng.below(10));
      auto x = random_layers<float>(layers, len, static_cast<Eigen::Index>(dim), rng);
      std::vector<Matrix<float>> padded;
      for (const auto& m : x) {
        Matrix<float> p(len + pad, m.cols());
        p << m, random_states<float>(pad, m.cols(), rng) * 50.0f;  // garbage in padded rows
        padded.push_back(std::move(p));
      }
      Mask mask(static_cast<std::size_t>(len), 1);
      Mask padded_mask = mask;
      padded_mask.resize(static_cast<std::size_t>(len + pad), 0);
      const auto a = head->forward(x, mask, nullptr, nullptr);
      const auto b = head->forward(padded, padded_mask, nullptr, nullptr);
      EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-5f) << to_string(arch);
    }
  }
}

// Cross-entropy against a fixed label through the head with a fixed
// dropout stream, so the finite-difference oracle sees the same mask as the
// analytic pass.
struct HeadLoss {
  Head<double>* head;
  std::vector<MD>* layers;
  Mask mask;
  Eigen::Index label;
  std::uint64_t dropout_seed;

  double operator()() const {
    Rng r(dropout_seed);
    const auto z = head->forward(*layers, mask, nullptr, &r);
    return -std::log(nn::softmax<double>(z)(label));
  }

  // Analytic gradients: parameter grads accumulated, input grads returned.
  std::vector<MD> backward() const {
    nn::ParamRefs<double> params;
    head->parameters(params);
    for (auto* p : params) p->zero_grad();
    auto cache = head->make_cache();
    Rng r(dropout_seed);
    const auto z = head->forward(*layers, mask, cache.get(), &r);
    RowVector<double> dz = nn::softmax<double>(z);
    dz(label) -= 1.0;
    std::vector<MD> d;
    for (const auto& m : *layers) d.push_back(MD::Zero(m.rows(), m.cols()));
    head->backward(*cache, dz, &d);
    return d;
  }
};

void expect_gradients_match(Head<double>& head, std::vector<MD> layers, const Mask& mask,
                            Eigen::Index samples_per_param, const std::string& what, std::size_t layer_stride = 1) {
  HeadLoss loss{&head, &layers, mask, 2, 99};
  auto dlayers = loss.backward();
  nn::ParamRefs<double> params;
  head.parameters(params);
  for (auto* p : params) {
    const auto check = central_difference(p->value, p->grad, loss, p->name, samples_per_param);
    EXPECT_LT(check.max_rel_error, 1e-4) << what << ": " << check.worst;
  }
  for (std::size_t l = 0; l < layers.size(); l += layer_stride) {
    const auto check = central_difference(layers[l], dlayers[l], loss, "input" + std::to_string(l), 40);
    EXPECT_LT(check.max_rel_error, 1e-4) << what << ": " << check.worst;
  }
}

TEST(HeadGradients, BertCnnFinalOnRandom8x768) {
  Rng rng(3);
  CnnFinalHead<double> head(768, 256, 0.2);
  head.init(rng);
  head.classifier.init(rng, 0.05);
  expect_gradients_match(head, {random_states<double>(8, 768, rng)}, Mask(8, 1), 150, "bert_cnn_final");
}

TEST(HeadGradients, BertCnnLayerwiseOnRandom8x768) {
  Rng rng(4);
  CnnLayerwiseHead<double> head(768, 13, 256, 0.2);
  head.init(rng);
  head.classifier.init(rng, 0.05);
  expect_gradients_match(head, random_layers<double>(13, 8, 768, rng), Mask(8, 1), 100, "bert_cnn_layerwise",
                         6);
}

TEST(HeadGradients, SequenceClassification) {
  Rng rng(5);
  SequenceClassificationHead<double> head(24, 0.2);
  head.init(rng);
  head.pooler.init(rng, 0.3);
  head.classifier.init(rng, 0.3);
  expect_gradients_match(head, random_layers<double>(3, 6, 24, rng), Mask(6, 1), 200, "bert");
}

TEST(HeadGradients, CnnEmbedWithShortActiveSpan) {
  Rng rng(6);
  CnnEmbedHead<double> head(300, 6, 7, 0.4);
  head.init(rng);
  head.classifier.init(rng, 0.3);
  // Four active positions: the width-5 convolution has no window.
  expect_gradients_match(head, {random_states<double>(6, 300, rng)}, Mask{1, 1, 1, 1, 0, 0}, 200, "cnn_embed");
}

TEST(HeadGradients, BiLstmWithHoleInMask) {
  Rng rng(7);
  BiLstmHead<double> head(12, 5, 0.5);
  head.init(rng);
  head.classifier.init(rng, 0.3);
  expect_gradients_match(head, {random_states<double>(7, 12, rng)}, Mask{1, 1, 0, 1, 1, 1, 0}, 200, "bilstm");
}

TEST(Heads, FewerThanThreeActivePositionsIsTooShort) {
  Rng rng(8);
  CnnFinalHead<double> head(16, 4, 0.2);
  head.init(rng);
  try {
    head.forward({random_states<double>(5, 16, rng)}, Mask{1, 1, 0, 0, 0}, nullptr, nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInputTooShort);
  }
  // Three active positions that never form a window.
  EXPECT_THROW(head.forward({random_states<double>(5, 16, rng)}, Mask{1, 0, 1, 0, 1}, nullptr, nullptr), Error);
  EXPECT_NO_THROW(head.forward({random_states<double>(5, 16, rng)}, Mask{0, 1, 1, 1, 0}, nullptr, nullptr));
}

TEST(Heads, WrongEmbeddingDimensionIsConfigError) {
  Rng rng(9);
  auto head = head_for<double>(Architecture::kCnnEmbed, 300, 1, 4);
  try {
    head->forward({random_states<double>(10, 200, rng)}, Mask(10, 1), nullptr, nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
  ModelConfig c = default_config(Architecture::kBilstmEmbed);
  EXPECT_THROW(make_head<double>(c, 100, 1), Error);
}

// Independent forward for the final-layer head: explicit loops over
// windows, filters and classes.
TEST(Heads, CnnFinalMatchesLoopOracle) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index dim = 2 + static_cast<Eigen::Index>(rng.below(5));
    const Eigen::Index filters = 1 + static_cast<Eigen::Index>(rng.below(6));
    const Eigen::Index len = 3 + static_cast<Eigen::Index>(rng.below(8));
    CnnFinalHead<double> head(static_cast<std::size_t>(dim), static_cast<std::size_t>(filters), 0.2);
    head.init(rng);
    head.classifier.init(rng, 1.0);
    head.classifier.bias.value = random_states<double>(1, 5, rng);
    const MD x = random_states<double>(len, dim, rng);
    Mask mask(static_cast<std::size_t>(len), 1);
    for (std::size_t i = 3; i < mask.size(); ++i) mask[i] = rng.bernoulli(0.7);

    std::vector<double> pooled(static_cast<std::size_t>(filters), -1e300);
    for (Eigen::Index s = 0; s + 3 <= len; ++s) {
      if (!(mask[s] && mask[s + 1] && mask[s + 2])) continue;
      for (Eigen::Index f = 0; f < filters; ++f) {
        double z = head.conv.bias.value(0, f);
        for (Eigen::Index j = 0; j < 3; ++j) {
          for (Eigen::Index d = 0; d < dim; ++d) z += head.conv.weight.value(f, j * dim + d) * x(s + j, d);
        }
        pooled[f] = std::max(pooled[f], std::max(0.0, z));
      }
    }
    const auto logits = head.forward({x}, mask, nullptr, nullptr);
    for (Eigen::Index k = 0; k < 5; ++k) {
      double z = head.classifier.bias.value(0, k);
      for (Eigen::Index f = 0; f < filters; ++f) z += head.classifier.weight.value(k, f) * pooled[f];
      EXPECT_NEAR(logits(k), z, 1e-12);
    }
  }
}

TEST(Heads, LayerwiseWithTiedScaledWeightsEqualsFinal) {
  Rng rng(11);
  const std::size_t layers = 13;
  for (int trial = 0; trial < 5; ++trial) {
    CnnFinalHead<float> final_head(768, 256, 0.2);
    final_head.init(rng);
    final_head.classifier.init(rng, 0.02);
    final_head.classifier.bias.value = random_states<float>(1, 5, rng);
    CnnLayerwiseHead<float> layerwise(768, layers, 256, 0.2);
    layerwise.conv.weight.value = final_head.conv.weight.value;
    layerwise.conv.bias.value = final_head.conv.bias.value;
    layerwise.classifier.bias.value = final_head.classifier.bias.value;
    for (std::size_t l = 0; l < layers; ++l) {
      layerwise.classifier.weight.value.middleCols(static_cast<Eigen::Index>(l) * 256, 256) =
          final_head.classifier.weight.value / static_cast<float>(layers);
    }
    const auto len = static_cast<Eigen::Index>(3 + rng.below(30));
    const Matrix<float> state = random_states<float>(len, 768, rng);
    const Mask mask(static_cast<std::size_t>(len), 1);
    const auto a = final_head.forward({state}, mask, nullptr, nullptr);
    const auto b = layerwise.forward(std::vector<Matrix<float>>(layers, state), mask, nullptr, nullptr);
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-5f);
  }
}

TEST(Heads, IdenticalLayersGiveIdenticalPooledBlocks) {
  // With the classifier reading one block at a time, every block yields
  // the same logits.
  Rng rng(12);
  CnnLayerwiseHead<double> head(32, 13, 16, 0.2);
  head.init(rng);
  const MD state = random_states<double>(9, 32, rng);
  const Mask mask(9, 1);
  const MD w = random_states<double>(5, 16, rng);
  std::vector<RowVector<double>> per_block;
  for (Eigen::Index l = 0; l < 13; ++l) {
    head.classifier.weight.value.setZero();
    head.classifier.weight.value.middleCols(l * 16, 16) = w;
    per_block.push_back(head.forward(std::vector<MD>(13, state), mask, nullptr, nullptr));
  }
  for (const auto& logits : per_block) EXPECT_EQ(logits, per_block.front());
}

TEST(Heads, BiLstmLengthOneDirectionsAgree) {
  Rng rng(13);
  BiLstmHead<double> head(10, 6, 0.5);
  head.init(rng);
  head.backward_lstm.w_ih.value = head.forward_lstm.w_ih.value;
  head.backward_lstm.w_hh.value = head.forward_lstm.w_hh.value;
  head.backward_lstm.bias.value = head.forward_lstm.bias.value;
  // Classifier computes A·h_forward - A·h_backward + b.
  const MD a = random_states<double>(5, 6, rng);
  head.classifier.weight.value << a, -a;
  head.classifier.bias.value = random_states<double>(1, 5, rng);
  const auto logits = head.forward({random_states<double>(1, 10, rng)}, Mask{1}, nullptr, nullptr);
  EXPECT_LE((logits - RowVector<double>(head.classifier.bias.value.row(0))).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Heads, DropoutOnlyWithGenerator) {
  Rng rng(14);
  CnnFinalHead<double> head(16, 64, 0.2);
  head.init(rng);
  head.classifier.init(rng, 0.1);
  const MD x = random_states<double>(6, 16, rng);
  const Mask mask(6, 1);
  const auto a = head.forward({x}, mask, nullptr, nullptr);
  EXPECT_EQ(a, head.forward({x}, mask, nullptr, nullptr));
  Rng d1(1), d2(1);
  EXPECT_EQ(head.forward({x}, mask, nullptr, &d1), head.forward({x}, mask, nullptr, &d2));
}

}  // namespace
}  // namespace stancekit::models
