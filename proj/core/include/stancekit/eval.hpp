#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "stancekit/annotation.hpp"
#include "stancekit/labels.hpp"

namespace stancekit::eval {

// Rows are true classes, columns predicted classes, in kLabelOrder.
using Confusion = std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>;
using ScoreRow = std::array<double, kNumClasses>;

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct PrfResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  PerClass<ClassMetrics> per_class;
  std::vector<std::string> warnings;  // undefined per-class precision, set to 0
};

struct ConfidenceInterval {
  double low = 0.0;
  double high = 0.0;
  double level = 0.95;
};

struct EvalResult {
  std::size_t n = 0;
  double accuracy = 0.0;
  double precision_weighted = 0.0;
  double recall_weighted = 0.0;
  double f1_weighted = 0.0;
  std::optional<double> auc_ovr_weighted;
  Confusion confusion{};
  PerClass<ClassMetrics> per_class;
  std::optional<ConfidenceInterval> ci_f1;
  std::vector<std::string> warnings;
};

Confusion confusion_matrix(std::span<const ClassLabel> y_true, std::span<const ClassLabel> y_pred);

PrfResult weighted_prf(std::span<const ClassLabel> y_true, std::span<const ClassLabel> y_pred);

// Support-weighted one-vs-rest ROC AUC using midranks for tied scores.
// Classes absent from y_true are skipped; fewer than two present classes
// raise a kUndefinedMetric Error.
double auc_ovr(std::span<const ClassLabel> y_true, std::span<const ScoreRow> scores);

enum class Metric { kF1Weighted, kPrecisionWeighted, kRecallWeighted, kAccuracy };
std::optional<Metric> parse_metric(std::string_view name);
std::string_view to_string(Metric metric);
double metric_value(Metric metric, std::span<const ClassLabel> y_true, std::span<const ClassLabel> y_pred);

// Percentile bootstrap over paired resamples. Resample r draws from a
// stream derived from (seed, r), so results do not depend on `threads`.
ConfidenceInterval bootstrap_ci(std::span<const ClassLabel> y_true, std::span<const ClassLabel> y_pred,
                                Metric metric, std::size_t n_resamples = 1000, double level = 0.95,
                                std::uint64_t seed = 42, unsigned threads = 1);

// Confusion, weighted P/R/F1 and, when `scores` is non-empty, AUC.
EvalResult evaluate(std::span<const ClassLabel> y_true, std::span<const ClassLabel> y_pred,
                    std::span<const ScoreRow> scores = {});

struct Prediction {
  std::string tweet_id;
  std::optional<ClassLabel> label;  // unset when the model could not score the item
  ScoreRow probs{};
  std::string error;
};

nlohmann::json to_json(const Prediction& prediction);
Prediction prediction_from_json(const nlohmann::json& row);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);
void write_predictions(const std::filesystem::path& path, std::span<const Prediction> predictions);

struct Aligned {
  std::vector<ClassLabel> y_true;
  std::vector<ClassLabel> y_pred;
  std::vector<ScoreRow> scores;
  std::vector<const annotation::GoldExample*> gold;
  std::vector<const Prediction*> predictions;
};

// Pairs non-excluded gold examples with predictions by tweet id. Missing
// or failed predictions raise a validation Error listing the ids.
Aligned align(std::span<const annotation::GoldExample> gold, std::span<const Prediction> predictions);

EvalResult evaluate(std::span<const annotation::GoldExample> gold, std::span<const Prediction> predictions);

// Trains on `train` and predicts every example of `test`.
using FoldRunner = std::function<std::vector<Prediction>(
    std::span<const annotation::GoldExample> train, std::span<const annotation::GoldExample> test,
    std::size_t fold)>;

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

struct CvResult {
  std::vector<EvalResult> folds;
  MeanStd precision, recall, f1, auc;
};

// One round per fold: train on the other k-1 folds, evaluate on the
// held-out fold. Fold entries are tweet ids of `gold`.
CvResult cross_validate(std::span<const annotation::GoldExample> gold,
                        std::span<const std::vector<std::string>> folds, const FoldRunner& runner);

struct ErrorCase {
  std::string tweet_id;
  std::string text;
  ClassLabel true_label = ClassLabel::kGeneric;
  ClassLabel predicted_label = ClassLabel::kGeneric;
  double predicted_prob = 0.0;
};

struct ErrorCell {
  ClassLabel true_label;
  ClassLabel predicted_label;
  std::size_t total = 0;  // misclassifications in this cell before capping
  std::vector<ErrorCase> cases;
};

// Misclassified items grouped by (true, predicted), highest predicted
// probability first, at most `max_cases` per cell.
std::vector<ErrorCell> error_report(std::span<const annotation::GoldExample> gold,
                                    std::span<const Prediction> predictions, std::size_t max_cases);

nlohmann::json to_json(const EvalResult& result);
nlohmann::json to_json(const CvResult& result);
nlohmann::json to_json(const std::vector<ErrorCell>& report);

// One line of a results table (architecture, LR, BS, dropout, PR, RC, F1, AUC).
struct TableRow {
  std::string model;
  std::string learning_rate;
  std::string batch_size;
  std::string dropout;
  std::string tags;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;
  std::string status = "run";
};

std::string tsv_header();
std::string to_tsv(const TableRow& row);
std::optional<TableRow> parse_tsv(const std::string& line);
TableRow table_row(const EvalResult& result, std::string model, std::string learning_rate,
                   std::string batch_size, std::string dropout, std::string tags = {});

}  // namespace stancekit::eval
