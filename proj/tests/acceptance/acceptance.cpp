// Acceptance checks. Prints one PASS/FAIL/SKIPPED line per criterion and
// exits non-zero when any check fails. Every oracle below is written
// independently of the library code it checks.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "stancekit/annotation.hpp"
#include "stancekit/corpus.hpp"
#include "stancekit/eval.hpp"
#include "stancekit/models/heads.hpp"
#include "stancekit/models/model.hpp"
#include "stancekit/nn/tensor.hpp"
#include "stancekit/random.hpp"
#include "stancekit/weak_label.hpp"
#include "stancekit/zeroshot.hpp"
#include "synthetic.hpp"

namespace {

using namespace stancekit;
using C = ClassLabel;

struct Outcome {
  enum class State { kPass, kFail, kSkipped } state = State::kPass;
  std::string detail;
};

// Collects failed expectations; the first few are kept for the report.
struct Checker {
  std::size_t failures = 0;
  std::vector<std::string> messages;

  bool expect(bool ok, const std::string& what) {
    if (!ok) {
      ++failures;
      if (messages.size() < 3) messages.push_back(what);
    }
    return ok;
  }
  Outcome outcome(const std::string& summary) const {
    if (failures == 0) return {Outcome::State::kPass, summary};
    std::string detail = summary + "; " + std::to_string(failures) + " failed:";
    for (const auto& m : messages) detail += " [" + m + "]";
    return {Outcome::State::kFail, detail};
  }
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1e", v);
  return buf;
}

C random_label(Rng& rng, const std::array<double, kNumClasses>& weights) {
  double total = 0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if ((u -= weights[c]) < 0) return label_at(c);
  }
  return label_at(kNumClasses - 1);
}

std::array<double, kNumClasses> random_weights(Rng& rng) {
  std::array<double, kNumClasses> w{};
  for (auto& v : w) v = rng.bernoulli(0.15) ? 0.0 : rng.uniform(0.1, 1.0);
  if (std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; })) w[0] = 1.0;
  return w;
}

// ---------------------------------------------------------------- metrics

struct OraclePrf {
  double p = 0, r = 0, f1 = 0;
  std::int64_t confusion[kNumClasses][kNumClasses] = {};
};

OraclePrf oracle_prf(const std::vector<C>& t, const std::vector<C>& p) {
  OraclePrf out;
  const std::size_t n = t.size();
  for (std::size_t a = 0; a < kNumClasses; ++a) {
    for (std::size_t b = 0; b < kNumClasses; ++b) {
      for (std::size_t i = 0; i < n; ++i) out.confusion[a][b] += t[i] == label_at(a) && p[i] == label_at(b);
    }
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    double tp = 0, predicted = 0, support = 0;
    for (std::size_t i = 0; i < n; ++i) {
      tp += t[i] == label_at(c) && p[i] == label_at(c);
      predicted += p[i] == label_at(c);
      support += t[i] == label_at(c);
    }
    const double prec = predicted > 0 ? tp / predicted : 0.0;
    const double rec = support > 0 ? tp / support : 0.0;
    const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    out.p += support / n * prec;
    out.r += support / n * rec;
    out.f1 += support / n * f1;
  }
  return out;
}

// Pairwise (Mann-Whitney) AUC per present class, support-weighted.
double oracle_auc(const std::vector<C>& t, const std::vector<eval::ScoreRow>& s) {
  const double n = static_cast<double>(t.size());
  double total = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    double wins = 0, pairs = 0, support = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] != label_at(c)) continue;
      support += 1;
      for (std::size_t j = 0; j < t.size(); ++j) {
        if (t[j] == label_at(c)) continue;
        pairs += 1;
        wins += s[i][c] > s[j][c] ? 1.0 : s[i][c] == s[j][c] ? 0.5 : 0.0;
      }
    }
    if (support > 0) total += support / n * (wins / pairs);
  }
  return total;
}

Outcome metric_oracles() {
  Checker check;
  Rng rng(1001);
  double worst_prf = 0;
  for (int inst = 0; inst < 500; ++inst) {
    const std::size_t n = 1 + rng.below(200);
    const auto wt = random_weights(rng), wp = random_weights(rng);
    const double agree = rng.uniform();
    std::vector<C> t(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = random_label(rng, wt);
      p[i] = rng.bernoulli(agree) ? t[i] : random_label(rng, wp);
    }
    const auto oracle = oracle_prf(t, p);
    const auto got = eval::weighted_prf(t, p);
    const auto confusion = eval::confusion_matrix(t, p);
    for (std::size_t a = 0; a < kNumClasses; ++a) {
      for (std::size_t b = 0; b < kNumClasses; ++b) {
        check.expect(confusion[a][b] == oracle.confusion[a][b], "confusion cell, instance " + std::to_string(inst));
      }
    }
    worst_prf = std::max({worst_prf, std::abs(got.precision - oracle.p), std::abs(got.recall - oracle.r),
                          std::abs(got.f1 - oracle.f1)});
  }
  check.expect(worst_prf <= 1e-9, "P/R/F1 max deviation " + sci(worst_prf));

  double worst_auc = 0;
  int auc_instances = 0;
  while (auc_instances < 300) {
    const std::size_t n = 2 + rng.below(150);
    const auto wt = random_weights(rng);
    std::vector<C> t(n);
    std::set<C> present;
    for (auto& v : t) present.insert(v = random_label(rng, wt));
    if (present.size() < 2) continue;
    // Small integer weights force many tied scores.
    const bool coarse = rng.bernoulli(0.5);
    std::vector<eval::ScoreRow> s(n);
    for (auto& row : s) {
      double sum = 0;
      do {
        sum = 0;
        for (auto& v : row) sum += v = coarse ? static_cast<double>(rng.below(4)) : rng.uniform();
      } while (sum == 0);
      for (auto& v : row) v /= sum;
    }
    worst_auc = std::max(worst_auc, std::abs(eval::auc_ovr(t, s) - oracle_auc(t, s)));
    ++auc_instances;
  }
  check.expect(worst_auc <= 1e-9, "AUC max deviation " + sci(worst_auc));
  return check.outcome("P/R/F1 and confusion on 500 instances, max |d| " + sci(worst_prf) +
                       "; AUC on 300 instances, max |d| " + sci(worst_auc) + " (tol 1e-9)");
}

// ------------------------------------------------------------------ kappa

double oracle_kappa(const std::vector<C>& a, const std::vector<C>& b) {
  const double n = static_cast<double>(a.size());
  double agree = 0, expected = 0;
  for (std::size_t i = 0; i < a.size(); ++i) agree += a[i] == b[i];
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double ca = static_cast<double>(std::count(a.begin(), a.end(), label_at(c)));
    const double cb = static_cast<double>(std::count(b.begin(), b.end(), label_at(c)));
    expected += (ca / n) * (cb / n);
  }
  return (agree / n - expected) / (1 - expected);
}

Outcome kappa() {
  Checker check;
  const std::vector<C> a = {C::kSympathy, C::kAntipathy, C::kSympathy, C::kAntipathy};
  const std::vector<C> b = {C::kSympathy, C::kSympathy, C::kAntipathy, C::kAntipathy};
  const double hand = annotation::cohen_kappa(a, b);
  check.expect(hand == 0.0, "hand case gave " + sci(hand));

  Rng rng(2002);
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = 1 + rng.below(60);
    const auto w = random_weights(rng);
    std::vector<C> x(n);
    for (auto& v : x) v = random_label(rng, w);
    const double k = annotation::cohen_kappa(x, x);
    check.expect(k == 1.0, "kappa(x, x) = " + sci(k));
  }

  double worst = 0;
  int pairs = 0;
  while (pairs < 500) {
    const std::size_t n = 2 + rng.below(100);
    const auto wa = random_weights(rng), wb = random_weights(rng);
    const double agree = rng.uniform();
    std::vector<C> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = random_label(rng, wa);
      y[i] = rng.bernoulli(agree) ? x[i] : random_label(rng, wb);
    }
    const double oracle = oracle_kappa(x, y);
    if (!std::isfinite(oracle)) continue;  // both raters constant and identical
    worst = std::max(worst, std::abs(annotation::cohen_kappa(x, y) - oracle));
    ++pairs;
  }
  check.expect(worst <= 1e-9, "random pairs max deviation " + sci(worst));
  return check.outcome("hand case = " + sci(hand) + " (exactly 0 required); kappa(x,x) = 1 on 500; 500 random pairs max |d| " +
                       sci(worst) + " (tol 1e-9)");
}

// ------------------------------------------------------------ weak labels

bool letters_only(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char ch) { return (ch >= 'a' && ch <= 'z') || ch == ' '; });
}

std::vector<std::string> words_of(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

// Distinct phrases of each class found as contiguous word runs.
weak_label::Scores oracle_scores(const std::string& text, const weak_label::Lexicon& lex) {
  const auto tokens = words_of(text);
  weak_label::Scores scores{};
  for (C c : kLabelOrder) {
    for (const auto& phrase : lex.phrases(c)) {
      const auto pw = words_of(phrase);
      bool found = false;
      for (std::size_t s = 0; !found && s + pw.size() <= tokens.size(); ++s) {
        found = std::equal(pw.begin(), pw.end(), tokens.begin() + static_cast<std::ptrdiff_t>(s));
      }
      scores[c] += found;
    }
  }
  return scores;
}

std::optional<C> oracle_decision(const weak_label::Scores& scores) {
  int best = 0;
  for (int s : scores) best = std::max(best, s);
  if (best == 0) return C::kGeneric;
  std::vector<C> top;
  for (C c : kLabelOrder) {
    if (scores[c] == best) top.push_back(c);
  }
  return top.size() == 1 ? std::optional<C>(top[0]) : std::nullopt;
}

Outcome weak_labeler() {
  Checker check;
  const auto lex = weak_label::load_lexicon(std::filesystem::path(STANCEKIT_SOURCE_DIR) / "config" / "lexicon.yaml");

  // Plain-word phrases that contain no phrase of another class.
  std::set<std::string> phrase_words;
  std::map<C, std::vector<std::string>> usable;
  std::vector<std::string> all_phrases;
  for (C c : kLabelOrder) {
    for (const auto& p : lex.phrases(c)) {
      for (const auto& w : words_of(p)) phrase_words.insert(w);
    }
  }
  for (C c : kLabelOrder) {
    for (const auto& p : lex.phrases(c)) {
      if (!letters_only(p)) continue;
      all_phrases.push_back(p);
      const auto s = oracle_scores(p, lex);
      bool clean = true;
      for (C other : kLabelOrder) clean &= other == c || s[other] == 0;
      if (clean) usable[c].push_back(p);
    }
  }
  std::vector<std::string> filler;
  for (std::string w : {"today", "people", "city", "said", "news", "many", "morning", "weather", "train", "coffee",
                        "friday", "street", "again", "watch", "their", "house", "video", "music", "little", "game"}) {
    if (!phrase_words.count(w)) filler.push_back(w);
  }

  Rng rng(3003);
  auto filler_run = [&](std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += testing::pick(rng, filler) + " ";
    return s;
  };

  // Planted corpus: 20 tweets per class, each carrying phrases of one
  // class only (none for GEN).
  std::vector<corpus::TweetRecord> records;
  std::vector<C> planted;
  for (C c : kLabelOrder) {
    const bool needs_phrases = c != C::kGeneric;
    if (needs_phrases && usable[c].empty()) {
      check.expect(false, "no usable phrases for a class");
      continue;
    }
    for (int i = 0; i < 20; ++i) {
      std::string text = filler_run(1 + rng.below(4));
      if (needs_phrases) {
        const std::size_t k = 1 + rng.below(3);
        for (std::size_t j = 0; j < k; ++j) text += testing::pick(rng, usable[c]) + " " + filler_run(1 + rng.below(3));
      }
      corpus::TweetRecord r;
      r.id = "p" + std::to_string(records.size());
      r.text = text;
      r.lang = "en";
      records.push_back(r);
      planted.push_back(c);
    }
  }
  const auto first = weak_label::label_corpus(records, lex, 1);
  const auto second = weak_label::label_corpus(records, lex, 4);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    correct += first.silver[i].label == planted[i];
    check.expect(weak_label::to_json(first.silver[i]) == weak_label::to_json(second.silver[i]),
                 "labeling differs between runs for " + records[i].id);
  }
  check.expect(correct == 100 && records.size() == 100, std::to_string(correct) + "/100 planted labels recovered");

  // Randomized texts over phrase and filler words.
  std::size_t distinct_ok = 0, monotone_ok = 0, consistent_ok = 0, oracle_ok = 0;
  const std::size_t trials = 1000;
  for (std::size_t t = 0; t < trials; ++t) {
    std::string text = filler_run(rng.below(4));
    const std::size_t parts = rng.below(5);
    for (std::size_t j = 0; j < parts; ++j) text += testing::pick(rng, all_phrases) + " " + filler_run(rng.below(3));
    const auto scores = weak_label::score_classes(text, lex);
    oracle_ok += scores == oracle_scores(text, lex);

    const auto phrase = testing::pick(rng, all_phrases);
    const std::string once = text + " " + filler.front() + " " + phrase;
    const std::string twice = once + " " + filler.front() + " " + phrase;
    distinct_ok += weak_label::score_classes(once, lex) == weak_label::score_classes(twice, lex);

    monotone_ok += weak_label::score_classes(text + " " + filler_run(1 + rng.below(5)), lex) == scores;

    corpus::TweetRecord r;
    r.id = "r";
    r.text = text;
    const auto silver = weak_label::silver_label(r, lex);
    consistent_ok += silver.label == oracle_decision(silver.scores) && silver.scores == scores;
  }
  check.expect(oracle_ok == trials, "window oracle agreement " + std::to_string(oracle_ok));
  check.expect(distinct_ok == trials, "distinct-phrase property " + std::to_string(distinct_ok));
  check.expect(monotone_ok == trials, "monotonicity property " + std::to_string(monotone_ok));
  check.expect(consistent_ok == trials, "label/score consistency " + std::to_string(consistent_ok));
  return check.outcome(std::to_string(correct) + "/100 planted labels; deterministic across runs and threads; " +
                       "distinct-phrase " + std::to_string(distinct_ok) + "/1000, monotonicity " +
                       std::to_string(monotone_ok) + "/1000, window oracle " + std::to_string(oracle_ok) + "/1000");
}

// ------------------------------------------------------------------ dedup

Outcome dedup() {
  Checker check;
  Rng rng(4004);
  std::vector<corpus::TweetRecord> records;
  std::set<std::string> originals;
  auto stamp = [](int minute) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "2020-03-%02dT%02d:%02d:00Z", 1 + minute / 1440, (minute / 60) % 24, minute % 60);
    return corpus::Timestamp::parse(buf);
  };
  static const std::vector<std::string> topics = {"border", "asylum", "jobs", "schools", "housing", "visas"};
  for (int i = 0; i < 201; ++i) {
    corpus::TweetRecord r;
    r.id = "o" + std::to_string(i);
    r.text = "original post " + std::to_string(i) + " about " + testing::pick(rng, topics);
    r.created_at = stamp(i);
    r.lang = "en";
    records.push_back(r);
    originals.insert(r.id);
  }
  // 99 planted duplicates, all later than their originals: a reused id,
  // a case change, or a retweet with a mention.
  for (int d = 0; d < 99; ++d) {
    const auto& source = records[rng.below(201)];
    corpus::TweetRecord r = source;
    r.created_at = stamp(5000 + d);
    switch (d % 3) {
      case 0:
        r.text = "unrelated fresh text " + std::to_string(d);
        break;
      case 1:
        r.id = "c" + std::to_string(d);
        std::transform(r.text.begin(), r.text.end(), r.text.begin(), ::toupper);
        break;
      default:
        r.id = "rt" + std::to_string(d);
        r.text = "RT @someone" + std::to_string(d) + ": " + source.text;
        r.is_retweet = true;
        break;
    }
    records.push_back(r);
  }
  rng.shuffle(std::span<corpus::TweetRecord>(records));

  const auto result = corpus::deduplicate(records);
  check.expect(result.removed_fraction == 0.33, "removed_fraction " + std::to_string(result.removed_fraction));
  std::set<std::string> kept;
  for (const auto& r : result.records) kept.insert(r.id);
  check.expect(kept == originals, "kept set differs from the planted originals");

  const auto again = corpus::deduplicate(result.records);
  check.expect(again.records == result.records && again.removed_fraction == 0.0, "second pass changed the corpus");
  char frac[32];
  std::snprintf(frac, sizeof frac, "%.17g", result.removed_fraction);
  return check.outcome("300 records with 99 planted duplicates -> removed_fraction " + std::string(frac) +
                       " (== 0.33 required); originals kept; second pass removes nothing");
}

// ------------------------------------------------------------------ heads

using MD = nn::Matrix<double>;

template <typename T>
nn::Matrix<T> random_states(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  nn::Matrix<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.normal());
  return m;
}

double head_gradient_error(models::Head<double>& head, std::vector<MD> layers, Eigen::Index per_param,
                           std::size_t layer_stride, std::string& worst) {
  const nn::Mask mask(static_cast<std::size_t>(layers[0].rows()), 1);
  const std::uint64_t dropout_seed = 77;
  const Eigen::Index label = 3;
  auto loss = [&] {
    Rng r(dropout_seed);
    return -std::log(nn::softmax<double>(head.forward(layers, mask, nullptr, &r))(label));
  };
  nn::ParamRefs<double> params;
  head.parameters(params);
  for (auto* p : params) p->zero_grad();
  auto cache = head.make_cache();
  Rng r(dropout_seed);
  nn::RowVector<double> dz = nn::softmax<double>(head.forward(layers, mask, cache.get(), &r));
  dz(label) -= 1.0;
  std::vector<MD> dlayers;
  for (const auto& m : layers) dlayers.push_back(MD::Zero(m.rows(), m.cols()));
  head.backward(*cache, dz, &dlayers);

  double max_err = 0;
  auto record = [&](const testing::GradCheck& g) {
    if (g.max_rel_error >= max_err) {
      max_err = g.max_rel_error;
      worst = g.worst;
    }
  };
  for (auto* p : params) record(testing::central_difference(p->value, p->grad, loss, p->name, per_param));
  for (std::size_t l = 0; l < layers.size(); l += layer_stride) {
    record(testing::central_difference(layers[l], dlayers[l], loss, "input" + std::to_string(l), 40));
  }
  return max_err;
}

template <typename T>
double head_padding_deviation(models::Head<T>& head, std::size_t num_layers, Rng& rng) {
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto len = static_cast<Eigen::Index>(3 + rng.below(14));
    const auto pad = static_cast<Eigen::Index>(1 + rng.below(12));
    std::vector<nn::Matrix<T>> x, padded;
    for (std::size_t l = 0; l < num_layers; ++l) {
      x.push_back(random_states<T>(len, 768, rng));
      nn::Matrix<T> p(len + pad, 768);
      p << x.back(), random_states<T>(pad, 768, rng) * T(50);
      padded.push_back(std::move(p));
    }
    nn::Mask mask(static_cast<std::size_t>(len), 1), padded_mask = mask;
    padded_mask.resize(static_cast<std::size_t>(len + pad), 0);
    const auto a = head.forward(x, mask, nullptr, nullptr);
    const auto b = head.forward(padded, padded_mask, nullptr, nullptr);
    if (a.size() != 5 || b.size() != 5) return INFINITY;
    worst = std::max(worst, static_cast<double>((a - b).cwiseAbs().maxCoeff()));
  }
  return worst;
}

template <typename T>
void scramble_classifier(models::Head<T>& head, Rng& rng) {
  nn::ParamRefs<T> params;
  head.parameters(params);
  for (auto* p : params) {
    if (p->name.rfind("head.classifier", 0) == 0) nn::init_normal(*p, rng, 0.1);
  }
}

// Model-level padding check through the mock encoder.
double model_padding_deviation(models::Architecture arch, Rng& rng) {
  auto config = models::default_config(arch);
  config.encoder_name = "mock";
  config.max_seq_length = 64;
  config.epochs = 1;
  config.batch_size = 8;
  config.learning_rate = 1e-3;
  const auto model = models::train(config, testing::separable(20, 5));
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    const auto in = model.prepare(testing::random_tweet(rng, 20) + " alpha beta");
    auto padded = in;
    const std::size_t extra = 1 + rng.below(20);
    for (std::size_t k = 0; k < extra; ++k) {
      padded.ids.push_back(0);
      padded.mask.push_back(0);
    }
    const auto a = model.logits(in), b = model.logits(padded);
    for (std::size_t c = 0; c < a.size(); ++c) worst = std::max(worst, std::abs(a[c] - b[c]));
  }
  return worst;
}

Outcome heads() {
  Checker check;
  Rng rng(5005);
  std::string worst_final, worst_layerwise;

  models::CnnFinalHead<double> final_head(768, 256, 0.2);
  final_head.init(rng);
  final_head.classifier.init(rng, 0.05);
  const double err_final = head_gradient_error(final_head, {random_states<double>(8, 768, rng)}, 150, 1, worst_final);

  models::CnnLayerwiseHead<double> layer_head(768, 13, 256, 0.2);
  layer_head.init(rng);
  layer_head.classifier.init(rng, 0.05);
  std::vector<MD> layers;
  for (int l = 0; l < 13; ++l) layers.push_back(random_states<double>(8, 768, rng));
  const double err_layer = head_gradient_error(layer_head, layers, 100, 6, worst_layerwise);
  check.expect(err_final < 1e-4, "bert_cnn_final gradient " + worst_final);
  check.expect(err_layer < 1e-4, "bert_cnn_layerwise gradient " + worst_layerwise);

  models::CnnFinalHead<float> final_f(768, 256, 0.2);
  final_f.init(rng);
  scramble_classifier(final_f, rng);
  models::CnnLayerwiseHead<float> layer_f(768, 13, 256, 0.2);
  layer_f.init(rng);
  scramble_classifier(layer_f, rng);
  const double pad_final = head_padding_deviation(final_f, 1, rng);
  const double pad_layer = head_padding_deviation(layer_f, 13, rng);
  const double pad_model_final = model_padding_deviation(models::Architecture::kBertCnnFinal, rng);
  const double pad_model_layer = model_padding_deviation(models::Architecture::kBertCnnLayerwise, rng);
  const double pad = std::max({pad_final, pad_layer, pad_model_final, pad_model_layer});
  check.expect(pad <= 1e-5, "padding deviation " + sci(pad));

  return check.outcome("logits length 5; padding max |d| " + sci(pad) + " (tol 1e-5, float); gradient rel err final " +
                       sci(err_final) + ", layerwise " + sci(err_layer) + " (tol 1e-4, double, 8x768)");
}

// ---------------------------------------------------------------- overfit

Outcome overfit() {
  Checker check;
  auto config = models::default_config(models::Architecture::kBertCnnFinal);
  config.encoder_name = "mock";
  config.filters = 256;
  config.epochs = 10;
  config.batch_size = 16;
  config.learning_rate = 1e-3;
  const auto data = testing::separable(50, 6006);
  const auto model = models::train(config, data);

  std::vector<models::TextItem> items;
  for (const auto& ex : data) items.push_back({ex.id, ex.text});
  const auto predictions = model.predict(items);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += predictions[i].label == data[i].label;
  const double accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  const auto encoder = models::mock_encoder_config();
  check.expect(encoder.layers == 4 && encoder.hidden == 16, "mock encoder is not 4 layers x 16");
  check.expect(model.history().size() == 10, "expected 10 epochs");
  check.expect(accuracy >= 0.95, "training accuracy " + std::to_string(accuracy));
  char buf[96];
  std::snprintf(buf, sizeof buf, "bert_cnn_final on 50 separable examples: train accuracy %.2f after %zu epochs (>= 0.95)",
                accuracy, model.history().size());
  return check.outcome(buf);
}

// -------------------------------------------------------------- zero-shot

// Entailment per hypothesis from a per-class value list; `order` permutes
// which value each of a class's hypotheses receives.
class PlantedBackend : public zeroshot::NliBackend {
 public:
  PlantedBackend(zeroshot::TagSet set, const std::string& templ, std::map<C, std::vector<double>> values,
                 std::map<C, std::vector<std::size_t>> order)
      : values_(std::move(values)), order_(std::move(order)) {
    std::map<C, std::size_t> seen;
    for (const auto& tag : zeroshot::tags(set)) {
      slot_[zeroshot::hypothesis(templ, tag.text)] = {tag.label, seen[tag.label]++};
    }
  }
  std::vector<zeroshot::NliScores> score(std::string_view, std::span<const std::string> hypotheses) override {
    std::vector<zeroshot::NliScores> out;
    for (const auto& h : hypotheses) {
      const auto [label, index] = slot_.at(h);
      const double e = values_.at(label)[order_.at(label)[index]];
      out.push_back({e, (1 - e) / 2, (1 - e) / 2});
    }
    return out;
  }
  std::string name() const override { return "planted"; }

 private:
  std::map<std::string, std::pair<C, std::size_t>> slot_;
  std::map<C, std::vector<double>> values_;
  std::map<C, std::vector<std::size_t>> order_;
};

std::map<C, std::size_t> tag_counts(zeroshot::TagSet set) {
  std::map<C, std::size_t> counts;
  for (const auto& t : zeroshot::tags(set)) ++counts[t.label];
  return counts;
}

Outcome zero_shot() {
  Checker check;
  Rng rng(7007);
  const zeroshot::TagSet sets[] = {zeroshot::TagSet::kSingle, zeroshot::TagSet::kDouble, zeroshot::TagSet::kMulti};
  const std::string templ(zeroshot::kDefaultTemplate);

  double worst_sum = 0;
  for (int run = 0; run < 1000; ++run) {
    zeroshot::HashBackend backend(rng.next());
    zeroshot::Config config;
    config.tag_set = sets[rng.below(3)];
    config.aggregation = rng.bernoulli(0.5) ? zeroshot::Aggregation::kMean : zeroshot::Aggregation::kMax;
    if (rng.bernoulli(0.3)) config.hypothesis_template = "Stance: {tag}.";
    const auto r = zeroshot::classify(testing::random_tweet(rng, 20), config, backend);
    double sum = 0;
    for (double p : r.probs) {
      sum += p;
      check.expect(p >= 0 && p <= 1, "probability outside [0, 1]");
    }
    worst_sum = std::max(worst_sum, std::abs(sum - 1));
  }
  check.expect(worst_sum <= 1e-6, "distribution sum off by " + sci(worst_sum));

  // Permuting which hypothesis of a class carries which score.
  std::size_t permutation_exact = 0;
  const std::size_t permutation_trials = 300;
  for (std::size_t trial = 0; trial < permutation_trials; ++trial) {
    const auto set = sets[1 + rng.below(2)];
    std::map<C, std::vector<double>> values;
    std::map<C, std::vector<std::size_t>> identity, shuffled;
    for (const auto& [label, n] : tag_counts(set)) {
      for (std::size_t i = 0; i < n; ++i) values[label].push_back(rng.uniform());
      identity[label].resize(n);
      std::iota(identity[label].begin(), identity[label].end(), 0);
      shuffled[label] = identity[label];
      rng.shuffle(std::span<std::size_t>(shuffled[label]));
    }
    zeroshot::Config config;
    config.tag_set = set;
    PlantedBackend a(set, templ, values, identity), b(set, templ, values, shuffled);
    const auto ra = zeroshot::classify("text", config, a);
    const auto rb = zeroshot::classify("text", config, b);
    permutation_exact += ra.probs == rb.probs && ra.label == rb.label;
  }
  check.expect(permutation_exact == permutation_trials, "permutation changed the output");

  // Brute-force aggregation: explicit per-class mean, rescale, first argmax.
  std::size_t argmax_agree = 0, argmax_total = 0;
  double worst_prob = 0;
  for (int cfg = 0; cfg < 20; ++cfg) {
    const auto set = sets[cfg % 3];
    const bool coarse = cfg % 2 == 1;  // quarter steps produce ties
    zeroshot::TableBackend table;
    std::vector<std::string> texts;
    std::map<std::pair<std::string, std::string>, double> entail;
    for (int t = 0; t < 25; ++t) {
      texts.push_back("config " + std::to_string(cfg) + " text " + std::to_string(t));
      for (const auto& tag : zeroshot::tags(set)) {
        const auto h = zeroshot::hypothesis(templ, tag.text);
        const double e = coarse ? 0.25 * static_cast<double>(rng.below(5)) : rng.uniform();
        entail[{texts.back(), h}] = e;
        table.set(texts.back(), h, e);
      }
    }
    zeroshot::Config config;
    config.tag_set = set;
    for (const auto& text : texts) {
      std::array<double, kNumClasses> sum{}, count{};
      for (const auto& tag : zeroshot::tags(set)) {
        sum[index_of(tag.label)] += entail[{text, zeroshot::hypothesis(templ, tag.text)}];
        count[index_of(tag.label)] += 1;
      }
      std::array<double, kNumClasses> prob{};
      double total = 0;
      for (std::size_t c = 0; c < kNumClasses; ++c) total += prob[c] = sum[c] / count[c];
      std::size_t best = 0;
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        prob[c] = total > 0 ? prob[c] / total : 0.2;
        if (prob[c] > prob[best]) best = c;
      }
      const auto r = zeroshot::classify(text, config, table);
      ++argmax_total;
      argmax_agree += r.label == label_at(best);
      for (std::size_t c = 0; c < kNumClasses; ++c) worst_prob = std::max(worst_prob, std::abs(r.probs[c] - prob[c]));
    }
  }
  check.expect(argmax_agree == argmax_total, "argmax disagreements with the oracle");
  check.expect(worst_prob <= 1e-12, "probabilities off the oracle by " + sci(worst_prob));

  // A single tag per class: the class score is that tag's entailment.
  std::size_t identity_ok = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::map<C, std::vector<double>> values;
    std::map<C, std::vector<std::size_t>> order;
    for (C c : kLabelOrder) {
      values[c] = {rng.uniform()};
      order[c] = {0};
    }
    PlantedBackend backend(zeroshot::TagSet::kSingle, templ, values, order);
    zeroshot::Config config;
    const auto r = zeroshot::classify("text", config, backend);
    bool same = true;
    for (C c : kLabelOrder) same &= r.raw[index_of(c)] == values[c][0];
    identity_ok += same;
  }
  check.expect(identity_ok == 200, "single-tag identity failed");

  return check.outcome("1000 mock runs sum to 1 within " + sci(worst_sum) + " (tol 1e-6); permutation exact " +
                       std::to_string(permutation_exact) + "/" + std::to_string(permutation_trials) +
                       "; argmax matches oracle " + std::to_string(argmax_agree) + "/" + std::to_string(argmax_total) +
                       " over 20 configurations; single-tag identity " + std::to_string(identity_ok) + "/200");
}

// -------------------------------------------------------------- splitting

Outcome splitting() {
  Checker check;
  Rng rng(8008);
  const std::size_t k = 5;
  const double ratio = 0.85;
  for (int set = 0; set < 200; ++set) {
    std::vector<annotation::GoldExample> gold;
    std::map<std::string, C> label_of;
    std::array<std::size_t, kNumClasses> per_class{};
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      per_class[c] = k + rng.below(120);
      for (std::size_t i = 0; i < per_class[c]; ++i) {
        annotation::GoldExample g;
        g.tweet_id = "s" + std::to_string(set) + "-" + std::to_string(c) + "-" + std::to_string(i);
        g.label = label_at(c);
        label_of[g.tweet_id] = label_at(c);
        gold.push_back(g);
      }
    }
    for (std::size_t e = rng.below(4); e > 0; --e) {
      annotation::GoldExample g;
      g.tweet_id = "excluded-" + std::to_string(e);
      g.excluded = true;
      gold.push_back(g);
    }
    rng.shuffle(std::span<annotation::GoldExample>(gold));
    const std::uint64_t seed = rng.next();
    const auto split = annotation::split_dataset(gold, ratio, k, seed);
    const auto again = annotation::split_dataset(gold, ratio, k, seed);
    const std::string tag = "set " + std::to_string(set);
    check.expect(split.train_ids == again.train_ids && split.test_ids == again.test_ids && split.folds == again.folds,
                 tag + ": same seed gave a different split");

    const std::set<std::string> train(split.train_ids.begin(), split.train_ids.end());
    const std::set<std::string> test(split.test_ids.begin(), split.test_ids.end());
    std::set<std::string> both = train;
    both.insert(test.begin(), test.end());
    check.expect(train.size() == split.train_ids.size() && test.size() == split.test_ids.size(), tag + ": repeated ids");
    check.expect(both.size() == train.size() + test.size(), tag + ": train and test overlap");
    check.expect(both.size() == label_of.size(), tag + ": split does not cover the usable examples");
    for (const auto& id : both) check.expect(label_of.count(id) == 1, tag + ": excluded example in the split");

    // Per-class counts in a part within one example of its share.
    auto stratified = [&](const std::vector<std::string>& part, const std::array<std::size_t, kNumClasses>& pool,
                          std::size_t pool_size) {
      std::array<double, kNumClasses> counts{};
      for (const auto& id : part) counts[index_of(label_of[id])] += 1;
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        const double share = static_cast<double>(part.size()) * static_cast<double>(pool[c]) / static_cast<double>(pool_size);
        if (std::abs(counts[c] - share) > 1.0) return false;
      }
      return true;
    };
    check.expect(stratified(split.test_ids, per_class, label_of.size()), tag + ": test not stratified");
    check.expect(stratified(split.train_ids, per_class, label_of.size()), tag + ": train not stratified");

    std::array<std::size_t, kNumClasses> train_per_class{};
    for (const auto& id : split.train_ids) ++train_per_class[index_of(label_of[id])];
    std::multiset<std::string> fold_ids;
    check.expect(split.folds.size() == k, tag + ": wrong fold count");
    // Each fold holds within one example of a k-th of every class, so
    // per class no two folds differ by more than one.
    for (const auto& fold : split.folds) {
      fold_ids.insert(fold.begin(), fold.end());
      std::array<double, kNumClasses> counts{};
      for (const auto& id : fold) counts[index_of(label_of[id])] += 1;
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        const double share = static_cast<double>(train_per_class[c]) / static_cast<double>(k);
        check.expect(std::abs(counts[c] - share) < 1.0, tag + ": fold not stratified");
      }
    }
    check.expect(fold_ids.size() == train.size() && std::set<std::string>(fold_ids.begin(), fold_ids.end()) == train,
                 tag + ": folds do not partition the training portion");
  }
  return check.outcome("200 random gold sets: train/test disjoint and complete, 5 folds partition train, per-class "
                       "counts within 1 of share in every part, same seed reproduces the split");
}

// ----------------------------------------------------------------- driver

struct Criterion {
  std::string name;
  double time_limit_s;  // 0: none
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {"metric-oracles", 60, metric_oracles},
      {"cohen-kappa", 0, kappa},
      {"weak-labeler", 30, weak_labeler},
      {"dedup", 0, dedup},
      {"heads", 120, heads},
      {"overfit", 600, overfit},
      {"zero-shot", 0, zero_shot},
      {"splitting", 0, splitting},
      {"public-data", 0,
       [] {
         return Outcome{Outcome::State::kSkipped,
                        "bert_cnn_final on the public Davidson hate-speech dataset (weighted F1 >= 0.88) needs pretrained weights, the "
                        "dataset and a GPU-scale run; not part of the default suite"};
       }},
  };
  const std::set<std::string> only(argv + 1, argv + argc);

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.name)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {Outcome::State::kFail, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (outcome.state == Outcome::State::kPass && c.time_limit_s > 0 && seconds > c.time_limit_s) {
      outcome.state = Outcome::State::kFail;
      outcome.detail += "; exceeded the " + std::to_string(static_cast<int>(c.time_limit_s)) + " s budget";
    }
    const char* label = outcome.state == Outcome::State::kPass   ? "PASS"
                        : outcome.state == Outcome::State::kFail ? "FAIL"
                                                                 : "SKIPPED";
    failed += outcome.state == Outcome::State::kFail;
    std::printf("%-7s %-15s %s [%.1f s]\n", label, c.name.c_str(), outcome.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
