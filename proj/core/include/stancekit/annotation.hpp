#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "stancekit/labels.hpp"
#include "stancekit/weak_label.hpp"

namespace stancekit::annotation {

// Reserved annotator id used to resolve disagreements. Its label never
// counts toward required_annotators or agreement statistics.
inline constexpr std::string_view kAdjudicatorId = "__adjudicator__";
inline constexpr std::size_t kDefaultRequiredAnnotators = 2;

enum class TaskStatus { kOpen, kClaimed, kDone };
std::string_view to_string(TaskStatus status);

struct Claim {
  std::optional<ClassLabel> label;  // may be empty only when flagged multi-label
  bool multi_label_flag = false;
  std::int64_t timestamp_ms = 0;

  friend bool operator==(const Claim&, const Claim&) = default;
};

struct AnnotationTask {
  std::string task_id;
  std::string tweet_id;
  std::string text;
  weak_label::SilverLabel silver;
  std::size_t required_annotators = kDefaultRequiredAnnotators;
  TaskStatus status = TaskStatus::kOpen;
  std::map<std::string, Claim> claims;
  std::optional<Claim> adjudication;
  // Annotators holding an outstanding fetch on this task, with lease start.
  std::map<std::string, std::int64_t> leases;

  bool unanimous() const;
  bool flagged() const;
};

std::vector<AnnotationTask> create_tasks(std::span<const weak_label::SilverLabel> silver,
                                         const std::unordered_map<std::string, std::string>& texts,
                                         std::size_t required_annotators = kDefaultRequiredAnnotators);

// Records a label on `task` in place. Duplicate submissions raise a
// kDuplicateSubmission Error, labels on completed tasks a kConflict Error.
// The adjudicator may only label completed, disputed tasks.
void submit_label(AnnotationTask& task, const std::string& annotator_id,
                  std::optional<ClassLabel> label, bool multi_label_flag,
                  std::int64_t timestamp_ms = 0);

// Chance-corrected agreement between two equal-length label sequences.
// Returns 1.0 when both raters use one single identical class throughout.
double cohen_kappa(std::span<const ClassLabel> labels_a, std::span<const ClassLabel> labels_b);

struct GoldExample {
  std::string tweet_id;
  std::string text;
  std::optional<ClassLabel> label;  // set for every non-excluded example
  std::map<std::string, std::optional<ClassLabel>> annotator_labels;
  bool excluded = false;

  friend bool operator==(const GoldExample&, const GoldExample&) = default;
};

nlohmann::json to_json(const GoldExample& gold);
GoldExample gold_from_json(const nlohmann::json& row);
std::vector<GoldExample> read_gold(const std::filesystem::path& path);
void write_gold(const std::filesystem::path& path, std::span<const GoldExample> gold);

struct PairAgreement {
  std::string annotator_a;
  std::string annotator_b;
  std::size_t co_labeled = 0;
  std::optional<double> kappa;  // unset when nothing was co-labeled
};

struct FinalizeResult {
  std::vector<GoldExample> gold;
  std::vector<PairAgreement> kappa_report;
  std::vector<std::string> adjudication_queue;  // task ids awaiting adjudication
};

// Every task must be done unless `allow_partial`, in which case unfinished
// tasks are skipped.
FinalizeResult finalize_gold(std::span<const AnnotationTask> tasks, bool allow_partial = false);

std::vector<PairAgreement> agreement_report(std::span<const AnnotationTask> tasks);

struct DatasetSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::vector<std::vector<std::string>> folds;  // over the training portion
  std::uint64_t seed = 0;
  double ratio = 0.85;
  std::size_t k = 5;
};

nlohmann::json to_json(const DatasetSplit& split);
DatasetSplit split_from_json(const nlohmann::json& row);

// Stratified train/test split at `ratio` (train share) plus k stratified
// folds over the training portion. Excluded examples are dropped first.
DatasetSplit split_dataset(std::span<const GoldExample> gold, double ratio, std::size_t k,
                           std::uint64_t seed);

// k stratified folds over every usable example in `gold` (the whole pool,
// no held-out test set). Fold sizes differ by at most one.
std::vector<std::vector<std::string>> stratified_folds(std::span<const GoldExample> gold, std::size_t k,
                                                       std::uint64_t seed);

struct AuditEntry {
  std::uint64_t seq = 0;
  std::string task_id;
  std::string annotator_id;
  std::optional<ClassLabel> label;
  bool multi_label_flag = false;
  std::int64_t timestamp_ms = 0;
};

nlohmann::json to_json(const AnnotationTask& task);
nlohmann::json to_json(const AuditEntry& entry);

// Thread-safe task store journaled to a single append-only file. Reopening
// the same journal replays tasks and every accepted submission.
class AnnotationStore {
 public:
  using Clock = std::function<std::int64_t()>;

  // An empty path keeps the store in memory only.
  explicit AnnotationStore(std::filesystem::path journal = {},
                           std::chrono::milliseconds lease_timeout = std::chrono::minutes(30),
                           Clock clock = {});

  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  // Adds tasks whose ids are not present yet; returns the number added.
  std::size_t add_tasks(std::span<const AnnotationTask> tasks);

  // Claims the next task this annotator can label. Re-fetching returns the
  // task already leased by the same annotator.
  std::optional<AnnotationTask> claim_next(const std::string& annotator_id);

  AnnotationTask submit(const std::string& task_id, const std::string& annotator_id,
                        std::optional<ClassLabel> label, bool multi_label_flag);

  std::optional<AnnotationTask> find(const std::string& task_id) const;
  std::vector<AnnotationTask> snapshot() const;
  std::vector<AuditEntry> audit() const;
  std::size_t size() const;

  FinalizeResult finalize(bool allow_partial = false) const;

 private:
  void replay();
  void append(const nlohmann::json& event);
  std::int64_t now() const;

  std::filesystem::path journal_path_;
  std::ofstream journal_;
  std::chrono::milliseconds lease_timeout_;
  Clock clock_;

  mutable std::shared_mutex mutex_;
  std::vector<AnnotationTask> tasks_;  // queue order
  std::unordered_map<std::string, std::size_t> by_id_;
  std::vector<AuditEntry> audit_;
  std::uint64_t next_seq_ = 1;
};

}  // namespace stancekit::annotation
