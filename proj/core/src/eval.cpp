#include "stancekit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "stancekit/error.hpp"
#include "stancekit/jsonl.hpp"
#include "stancekit/random.hpp"

namespace stancekit::eval {
namespace {

using nlohmann::json;

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    fail(ErrorCode::kValidation, "y_true has " + std::to_string(a) + " items but y_pred has " +
                                     std::to_string(b));
  }
}

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

// Linear interpolation between order statistics.
double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

std::string fmt(double value, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

json class_map(const ScoreRow& row) {
  json out = json::object();
  for (ClassLabel c : kLabelOrder) out[std::string(to_code(c))] = row[index_of(c)];
  return out;
}

}  // namespace

Confusion confusion_matrix(std::span<const ClassLabel> y_true, std::span<const ClassLabel> y_pred) {
  check_lengths(y_true.size(), y_pred.size());
  Confusion m{};
  for (std::size_t i = 0; i < y_true.size(); ++i) ++m[index_of(y_true[i])][index_of(y_pred[i])];
  return m;
}

PrfResult weighted_prf(std::span<const ClassLabel> y_true, std::span<const ClassLabel> y_pred) {
  const Confusion m = confusion_matrix(y_true, y_pred);
  PrfResult out;
  const double n = static_cast<double>(y_true.size());
  if (y_true.empty()) {
    out.warnings.push_back("no examples; metrics set to 0");
    return out;
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::int64_t tp = m[c][c], predicted = 0, actual = 0;
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      predicted += m[j][c];
      actual += m[c][j];
    }
    ClassMetrics& cm = out.per_class.values[c];
    cm.support = static_cast<std::size_t>(actual);
    if (actual == 0) continue;  // zero weight
    if (predicted == 0) {
      out.warnings.push_back("precision undefined for " + std::string(to_code(label_at(c))) +
                             " (no predictions); set to 0");
    }
    cm.precision = safe_div(static_cast<double>(tp), static_cast<double>(predicted));
    cm.recall = safe_div(static_cast<double>(tp), static_cast<double>(actual));
    cm.f1 = safe_div(2.0 * cm.precision * cm.recall, cm.precision + cm.recall);
    const double w = static_cast<double>(actual) / n;
    out.precision += w * cm.precision;
    out.recall += w * cm.recall;
    out.f1 += w * cm.f1;
  }
  return out;
}

double auc_ovr(std::span<const ClassLabel> y_true, std::span<const ScoreRow> scores) {
  check_lengths(y_true.size(), scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double sum = std::accumulate(scores[i].begin(), scores[i].end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-3) {
      fail(ErrorCode::kValidation, "score row " + std::to_string(i) + " sums to " + fmt(sum, 6));
    }
  }
  const std::size_t n = y_true.size();
  std::array<std::size_t, kNumClasses> support{};
  for (ClassLabel y : y_true) ++support[index_of(y)];
  std::size_t present = 0;
  for (std::size_t s : support) present += s > 0 ? 1 : 0;
  if (present < 2) {
    fail(ErrorCode::kUndefinedMetric, "AUC needs at least two classes in the ground truth");
  }

  std::vector<std::size_t> order(n);
  std::vector<double> ranks(n);
  double total = 0.0, weight = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (support[c] == 0) continue;
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a][c] < scores[b][c]; });
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && scores[order[j + 1]][c] == scores[order[i]][c]) ++j;
      const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
      for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
      i = j + 1;
    }
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (index_of(y_true[i]) == c) rank_sum += ranks[i];
    }
    const double pos = static_cast<double>(support[c]);
    const double neg = static_cast<double>(n - support[c]);
    const double auc = (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
    total += pos * auc;
    weight += pos;
  }
  return total / weight;
}

std::optional<Metric> parse_metric(std::string_view name) {
  if (name == "f1" || name == "f1_weighted") return Metric::kF1Weighted;
  if (name == "precision" || name == "precision_weighted") return Metric::kPrecisionWeighted;
  if (name == "recall" || name == "recall_weighted") return Metric::kRecallWeighted;
  if (name == "accuracy") return Metric::kAccuracy;
  return std::nullopt;
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::kF1Weighted: return "f1_weighted";
    case Metric::kPrecisionWeighted: return "precision_weighted";
    case Metric::kRecallWeighted: return "recall_weighted";
    case Metric::kAccuracy: return "accuracy";
  }
  return "unknown";
}

double metric_value(Metric metric, std::span<const ClassLabel> y_true, std::span<const ClassLabel> y_pred) {
  if (metric == Metric::kAccuracy) {
    check_lengths(y_true.size(), y_pred.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) hits += y_true[i] == y_pred[i] ? 1 : 0;
    return safe_div(static_cast<double>(hits), static_cast<double>(y_true.size()));
  }
  const PrfResult prf = weighted_prf(y_true, y_pred);
  switch (metric) {
    case Metric::kPrecisionWeighted: return prf.precision;
    case Metric::kRecallWeighted: return prf.recall;
    default: return prf.f1;
  }
}

ConfidenceInterval bootstrap_ci(std::span<const ClassLabel> y_true, std::span<const ClassLabel> y_pred,
                                Metric metric, std::size_t n_resamples, double level,
                                std::uint64_t seed, unsigned threads) {
  check_lengths(y_true.size(), y_pred.size());
  if (y_true.empty()) fail(ErrorCode::kValidation, "bootstrap needs at least one example");
  if (n_resamples == 0) fail(ErrorCode::kValidation, "bootstrap needs at least one resample");
  if (!(level > 0.0 && level < 1.0)) fail(ErrorCode::kValidation, "confidence level must be in (0, 1)");

  const std::size_t n = y_true.size();
  std::vector<double> stats(n_resamples);
  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<ClassLabel> t(n), p(n);
    for (std::size_t r = begin; r < end; ++r) {
      Rng rng = Rng::derive(seed, r);
      for (std::size_t i = 0; i < n; ++i) {
        const auto k = rng.below(n);
        t[i] = y_true[k];
        p[i] = y_pred[k];
      }
      stats[r] = metric_value(metric, t, p);
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_resamples)));
  if (threads == 1) {
    work(0, n_resamples);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n_resamples + threads - 1) / threads;
    for (std::size_t b = 0; b < n_resamples; b += chunk) {
      pool.emplace_back(work, b, std::min(n_resamples, b + chunk));
    }
  }
  std::sort(stats.begin(), stats.end());
  const double tail = (1.0 - level) / 2.0;
  return {quantile(stats, tail), quantile(stats, 1.0 - tail), level};
}

EvalResult evaluate(std::span<const ClassLabel> y_true, std::span<const ClassLabel> y_pred,
                    std::span<const ScoreRow> scores) {
  EvalResult out;
  out.n = y_true.size();
  out.confusion = confusion_matrix(y_true, y_pred);
  const PrfResult prf = weighted_prf(y_true, y_pred);
  out.precision_weighted = prf.precision;
  out.recall_weighted = prf.recall;
  out.f1_weighted = prf.f1;
  out.per_class = prf.per_class;
  out.warnings = prf.warnings;
  out.accuracy = metric_value(Metric::kAccuracy, y_true, y_pred);
  if (!scores.empty()) {
    try {
      out.auc_ovr_weighted = auc_ovr(y_true, scores);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUndefinedMetric) throw;
      out.warnings.push_back(std::string("AUC not reported: ") + e.what());
    }
  }
  return out;
}

json to_json(const Prediction& prediction) {
  json row = {{"tweet_id", prediction.tweet_id},
              {"label", prediction.label ? json(std::string(to_code(*prediction.label))) : json(nullptr)},
              {"probs", class_map(prediction.probs)}};
  if (!prediction.error.empty()) row["error"] = prediction.error;
  return row;
}

Prediction prediction_from_json(const json& row) {
  Prediction p;
  p.tweet_id = row.at("tweet_id").is_string() ? row.at("tweet_id").get<std::string>()
                                               : row.at("tweet_id").dump();
  if (row.contains("label") && !row["label"].is_null()) p.label = require_label(row["label"].get<std::string>());
  if (row.contains("probs")) {
    const json& probs = row["probs"];
    for (ClassLabel c : kLabelOrder) {
      p.probs[index_of(c)] = probs.value(std::string(to_code(c)), 0.0);
    }
  }
  p.error = row.value("error", std::string());
  return p;
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  std::vector<Prediction> out;
  jsonl::for_each(path, [&](const json& row, std::size_t line) {
    try {
      out.push_back(prediction_from_json(row));
    } catch (const json::exception& e) {
      fail(ErrorCode::kParse, path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return out;
}

void write_predictions(const std::filesystem::path& path, std::span<const Prediction> predictions) {
  std::vector<json> rows;
  rows.reserve(predictions.size());
  for (const auto& p : predictions) rows.push_back(to_json(p));
  jsonl::write(path, rows);
}

Aligned align(std::span<const annotation::GoldExample> gold, std::span<const Prediction> predictions) {
  std::unordered_map<std::string_view, const Prediction*> by_id;
  for (const auto& p : predictions) by_id.emplace(p.tweet_id, &p);
  Aligned out;
  std::vector<std::string> missing, failed;
  for (const auto& g : gold) {
    if (g.excluded || !g.label) continue;
    auto it = by_id.find(g.tweet_id);
    if (it == by_id.end()) {
      missing.push_back(g.tweet_id);
      continue;
    }
    if (!it->second->label) {
      failed.push_back(g.tweet_id);
      continue;
    }
    out.y_true.push_back(*g.label);
    out.y_pred.push_back(*it->second->label);
    out.scores.push_back(it->second->probs);
    out.gold.push_back(&g);
    out.predictions.push_back(it->second);
  }
  auto join = [](const std::vector<std::string>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size() && i < 20; ++i) s += (i ? ", " : "") + ids[i];
    if (ids.size() > 20) s += ", ... (" + std::to_string(ids.size()) + " total)";
    return s;
  };
  if (!missing.empty()) fail(ErrorCode::kValidation, "no prediction for gold ids: " + join(missing));
  if (!failed.empty()) fail(ErrorCode::kValidation, "prediction failed for gold ids: " + join(failed));
  return out;
}

EvalResult evaluate(std::span<const annotation::GoldExample> gold, std::span<const Prediction> predictions) {
  const Aligned a = align(gold, predictions);
  return evaluate(a.y_true, a.y_pred, a.scores);
}

CvResult cross_validate(std::span<const annotation::GoldExample> gold,
                        std::span<const std::vector<std::string>> folds, const FoldRunner& runner) {
  if (folds.size() < 2) fail(ErrorCode::kValidation, "cross-validation needs at least 2 folds");
  std::unordered_map<std::string_view, const annotation::GoldExample*> by_id;
  for (const auto& g : gold) by_id.emplace(g.tweet_id, &g);
  auto lookup = [&](const std::string& id) {
    auto it = by_id.find(id);
    if (it == by_id.end()) fail(ErrorCode::kNotFound, "split references unknown tweet id " + id);
    return *it->second;
  };

  CvResult out;
  std::vector<double> p, r, f, auc;
  for (std::size_t k = 0; k < folds.size(); ++k) {
    std::vector<annotation::GoldExample> train, test;
    for (std::size_t j = 0; j < folds.size(); ++j) {
      for (const auto& id : folds[j]) (j == k ? test : train).push_back(lookup(id));
    }
    const auto predictions = runner(train, test, k);
    EvalResult fold = evaluate(std::span<const annotation::GoldExample>(test), predictions);
    p.push_back(fold.precision_weighted);
    r.push_back(fold.recall_weighted);
    f.push_back(fold.f1_weighted);
    if (fold.auc_ovr_weighted) auc.push_back(*fold.auc_ovr_weighted);
    out.folds.push_back(std::move(fold));
  }
  out.precision = mean_std(p);
  out.recall = mean_std(r);
  out.f1 = mean_std(f);
  out.auc = mean_std(auc);
  return out;
}

std::vector<ErrorCell> error_report(std::span<const annotation::GoldExample> gold,
                                    std::span<const Prediction> predictions, std::size_t max_cases) {
  const Aligned a = align(gold, predictions);
  std::map<std::pair<std::size_t, std::size_t>, ErrorCell> cells;
  for (std::size_t i = 0; i < a.y_true.size(); ++i) {
    if (a.y_true[i] == a.y_pred[i]) continue;
    auto key = std::make_pair(index_of(a.y_true[i]), index_of(a.y_pred[i]));
    auto [it, inserted] = cells.try_emplace(key, ErrorCell{a.y_true[i], a.y_pred[i], 0, {}});
    ++it->second.total;
    it->second.cases.push_back({a.gold[i]->tweet_id, a.gold[i]->text, a.y_true[i], a.y_pred[i],
                                a.scores[i][index_of(a.y_pred[i])]});
  }
  std::vector<ErrorCell> out;
  for (auto& [key, cell] : cells) {
    std::stable_sort(cell.cases.begin(), cell.cases.end(),
                     [](const ErrorCase& x, const ErrorCase& y) { return x.predicted_prob > y.predicted_prob; });
    if (cell.cases.size() > max_cases) cell.cases.resize(max_cases);
    out.push_back(std::move(cell));
  }
  return out;
}

json to_json(const EvalResult& result) {
  json confusion = json::array();
  for (const auto& row : result.confusion) confusion.push_back(row);
  json per_class = json::object();
  for (ClassLabel c : kLabelOrder) {
    const auto& m = result.per_class[c];
    per_class[std::string(to_code(c))] = {
        {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
  }
  json labels = json::array();
  for (ClassLabel c : kLabelOrder) labels.push_back(std::string(to_code(c)));
  json out = {{"n", result.n},
              {"accuracy", result.accuracy},
              {"precision_weighted", result.precision_weighted},
              {"recall_weighted", result.recall_weighted},
              {"f1_weighted", result.f1_weighted},
              {"auc_ovr_weighted", result.auc_ovr_weighted ? json(*result.auc_ovr_weighted) : json(nullptr)},
              {"labels", labels},
              {"confusion", confusion},
              {"per_class", per_class},
              {"warnings", result.warnings}};
  if (result.ci_f1) {
    out["ci_f1"] = {{"low", result.ci_f1->low}, {"high", result.ci_f1->high}, {"level", result.ci_f1->level}};
  }
  return out;
}

json to_json(const CvResult& result) {
  json folds = json::array();
  for (const auto& f : result.folds) folds.push_back(to_json(f));
  auto ms = [](const MeanStd& m) { return json{{"mean", m.mean}, {"std", m.stddev}}; };
  return {{"folds", folds},
          {"precision_weighted", ms(result.precision)},
          {"recall_weighted", ms(result.recall)},
          {"f1_weighted", ms(result.f1)},
          {"auc_ovr_weighted", ms(result.auc)}};
}

json to_json(const std::vector<ErrorCell>& report) {
  json out = json::array();
  for (const auto& cell : report) {
    json cases = json::array();
    for (const auto& c : cell.cases) {
      cases.push_back({{"tweet_id", c.tweet_id}, {"text", c.text}, {"predicted_prob", c.predicted_prob}});
    }
    out.push_back({{"true", std::string(to_code(cell.true_label))},
                   {"predicted", std::string(to_code(cell.predicted_label))},
                   {"total", cell.total},
                   {"cases", cases}});
  }
  return out;
}

std::string tsv_header() { return "model\tlr\tbatch_size\tdropout\ttags\tPR\tRC\tF1\tAUC\tstatus"; }

std::string to_tsv(const TableRow& row) {
  std::ostringstream out;
  out << row.model << '\t' << row.learning_rate << '\t' << row.batch_size << '\t' << row.dropout << '\t'
      << row.tags << '\t' << fmt(row.precision, 4) << '\t' << fmt(row.recall, 4) << '\t'
      << fmt(row.f1, 4) << '\t' << (row.auc ? fmt(*row.auc, 4) : std::string("-")) << '\t' << row.status;
  return out.str();
}

std::optional<TableRow> parse_tsv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, '\t')) fields.push_back(field);
  if (!line.empty() && line.back() == '\t') fields.emplace_back();
  if (fields.size() != 10 || fields[0] == "model") return std::nullopt;
  try {
    TableRow row;
    row.model = fields[0];
    row.learning_rate = fields[1];
    row.batch_size = fields[2];
    row.dropout = fields[3];
    row.tags = fields[4];
    row.precision = std::stod(fields[5]);
    row.recall = std::stod(fields[6]);
    row.f1 = std::stod(fields[7]);
    if (fields[8] != "-") row.auc = std::stod(fields[8]);
    row.status = fields[9];
    return row;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

TableRow table_row(const EvalResult& result, std::string model, std::string learning_rate,
                   std::string batch_size, std::string dropout, std::string tags) {
  TableRow row;
  row.model = std::move(model);
  row.learning_rate = std::move(learning_rate);
  row.batch_size = std::move(batch_size);
  row.dropout = std::move(dropout);
  row.tags = std::move(tags);
  row.precision = result.precision_weighted;
  row.recall = result.recall_weighted;
  row.f1 = result.f1_weighted;
  row.auc = result.auc_ovr_weighted;
  return row;
}

}  // namespace stancekit::eval
