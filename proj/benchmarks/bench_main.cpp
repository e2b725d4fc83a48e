#include <benchmark/benchmark.h>

#include <filesystem>
#include <string>
#include <vector>

#include "stancekit/eval.hpp"
#include "stancekit/models/heads.hpp"
#include "stancekit/random.hpp"
#include "stancekit/weak_label.hpp"
#include "stancekit/zeroshot.hpp"

namespace {

using namespace stancekit;

const weak_label::Lexicon& lexicon() {
  static const auto lex =
      weak_label::load_lexicon(std::filesystem::path(STANCEKIT_SOURCE_DIR) / "config" / "lexicon.yaml");
  return lex;
}

std::string tweet(Rng& rng, std::size_t words) {
  static const std::vector<std::string> vocab = {"refugees", "welcome", "border", "city", "today", "stop",
                                                 "invasion", "people", "jobs", "migrants", "support", "news"};
  std::string s;
  for (std::size_t i = 0; i < words; ++i) s += vocab[rng.below(vocab.size())] + " ";
  return s;
}

void BM_ScoreClasses(benchmark::State& state) {
  Rng rng(1);
  std::vector<std::string> texts;
  for (int i = 0; i < 256; ++i) texts.push_back(tweet(rng, static_cast<std::size_t>(state.range(0))));
  const auto& lex = lexicon();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(weak_label::score_classes(texts[i++ % texts.size()], lex));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ScoreClasses)->Arg(20)->Arg(60);

template <typename Head>
void run_head(benchmark::State& state, Head& head, std::size_t layers) {
  Rng rng(2);
  head.init(rng);
  const auto len = static_cast<Eigen::Index>(state.range(0));
  std::vector<nn::Matrix<float>> x;
  for (std::size_t l = 0; l < layers; ++l) x.push_back(nn::Matrix<float>::Random(len, 768));
  const nn::Mask mask(static_cast<std::size_t>(len), 1);
  for (auto _ : state) benchmark::DoNotOptimize(head.forward(x, mask, nullptr, nullptr));
}

void BM_CnnFinalForward(benchmark::State& state) {
  models::CnnFinalHead<float> head(768, 256, 0.2);
  run_head(state, head, 1);
}
BENCHMARK(BM_CnnFinalForward)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_CnnLayerwiseForward(benchmark::State& state) {
  models::CnnLayerwiseHead<float> head(768, 13, 256, 0.2);
  run_head(state, head, 13);
}
BENCHMARK(BM_CnnLayerwiseForward)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Metrics(benchmark::State& state) {
  Rng rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<ClassLabel> truth(n), pred(n);
  std::vector<eval::ScoreRow> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = label_at(rng.below(kNumClasses));
    pred[i] = label_at(rng.below(kNumClasses));
    double sum = 0;
    for (auto& v : scores[i]) sum += v = rng.uniform();
    for (auto& v : scores[i]) v /= sum;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval::weighted_prf(truth, pred));
    benchmark::DoNotOptimize(eval::auc_ovr(truth, scores));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Metrics)->Arg(1000)->Arg(10000);

void BM_ZeroShotMock(benchmark::State& state) {
  zeroshot::HashBackend backend(4);
  zeroshot::Config config;
  config.tag_set = zeroshot::TagSet::kMulti;
  Rng rng(5);
  const auto text = tweet(rng, 25);
  for (auto _ : state) benchmark::DoNotOptimize(zeroshot::classify(text, config, backend));
}
BENCHMARK(BM_ZeroShotMock);

}  // namespace

BENCHMARK_MAIN();
