#include "stancekit/annotation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stancekit/error.hpp"
#include "stancekit/jsonl.hpp"
#include "stancekit/random.hpp"

namespace stancekit::annotation {
namespace {

using nlohmann::json;

json label_json(const std::optional<ClassLabel>& label) {
  return label ? json(std::string(to_code(*label))) : json(nullptr);
}

std::optional<ClassLabel> label_from(const json& value) {
  if (value.is_null()) return std::nullopt;
  return require_label(value.get<std::string>());
}

json claim_json(const Claim& claim) {
  return {{"label", label_json(claim.label)},
          {"multi_label_flag", claim.multi_label_flag},
          {"timestamp", claim.timestamp_ms}};
}

bool is_adjudicator(const std::string& id) { return id == kAdjudicatorId; }

bool disputed(const AnnotationTask& task) {
  return task.status == TaskStatus::kDone && !task.flagged() && !task.unanimous();
}

void refresh_status(AnnotationTask& task) {
  if (task.claims.size() >= task.required_annotators) {
    task.status = TaskStatus::kDone;
  } else if (!task.claims.empty() || !task.leases.empty()) {
    task.status = TaskStatus::kClaimed;
  } else {
    task.status = TaskStatus::kOpen;
  }
}

}  // namespace

std::string_view to_string(TaskStatus status) {
  switch (status) {
    case TaskStatus::kOpen: return "open";
    case TaskStatus::kClaimed: return "claimed";
    case TaskStatus::kDone: return "done";
  }
  return "open";
}

bool AnnotationTask::unanimous() const {
  if (claims.empty()) return false;
  const auto& first = claims.begin()->second.label;
  if (!first) return false;
  return std::all_of(claims.begin(), claims.end(),
                     [&](const auto& entry) { return entry.second.label == first; });
}

bool AnnotationTask::flagged() const {
  return std::any_of(claims.begin(), claims.end(),
                     [](const auto& entry) { return entry.second.multi_label_flag; }) ||
         (adjudication && adjudication->multi_label_flag);
}

std::vector<AnnotationTask> create_tasks(std::span<const weak_label::SilverLabel> silver,
                                         const std::unordered_map<std::string, std::string>& texts,
                                         std::size_t required_annotators) {
  if (required_annotators < 1) fail(ErrorCode::kValidation, "required_annotators must be >= 1");
  std::vector<std::size_t> order(silver.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_partition(order.begin(), order.end(),
                        [&](std::size_t i) { return silver[i].abstained(); });
  std::vector<AnnotationTask> tasks;
  tasks.reserve(silver.size());
  for (std::size_t position = 0; position < order.size(); ++position) {
    const auto& s = silver[order[position]];
    auto text = texts.find(s.tweet_id);
    if (text == texts.end()) fail(ErrorCode::kNotFound, "no text for tweet id " + s.tweet_id);
    AnnotationTask task;
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "T%06zu", position + 1);
    task.task_id = buffer;
    task.tweet_id = s.tweet_id;
    task.text = text->second;
    task.silver = s;
    task.required_annotators = required_annotators;
    tasks.push_back(std::move(task));
  }
  return tasks;
}

void submit_label(AnnotationTask& task, const std::string& annotator_id,
                  std::optional<ClassLabel> label, bool multi_label_flag, std::int64_t timestamp_ms) {
  if (annotator_id.empty()) fail(ErrorCode::kValidation, "annotator id must not be empty");
  if (!label && !multi_label_flag) {
    fail(ErrorCode::kValidation, "a label is required unless the multi-label flag is set");
  }
  const Claim claim{label, multi_label_flag, timestamp_ms};
  if (is_adjudicator(annotator_id)) {
    if (task.adjudication) {
      fail(ErrorCode::kDuplicateSubmission, "task " + task.task_id + " is already adjudicated");
    }
    if (!disputed(task)) {
      fail(ErrorCode::kConflict, "task " + task.task_id + " is not awaiting adjudication");
    }
    task.adjudication = claim;
    return;
  }
  if (task.claims.contains(annotator_id)) {
    fail(ErrorCode::kDuplicateSubmission,
         "annotator " + annotator_id + " already labeled task " + task.task_id);
  }
  if (task.status == TaskStatus::kDone) {
    fail(ErrorCode::kConflict, "task " + task.task_id + " already has all required labels");
  }
  task.claims.emplace(annotator_id, claim);
  task.leases.erase(annotator_id);
  refresh_status(task);
}

double cohen_kappa(std::span<const ClassLabel> a, std::span<const ClassLabel> b) {
  if (a.size() != b.size()) {
    fail(ErrorCode::kValidation, "label sequences differ in length (" + std::to_string(a.size()) +
                                     " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) fail(ErrorCode::kValidation, "cannot compute kappa over empty sequences");
  const auto n = static_cast<std::int64_t>(a.size());
  PerClass<std::int64_t> count_a, count_b;
  std::int64_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++count_a[a[i]];
    ++count_b[b[i]];
    agree += a[i] == b[i];
  }
  std::int64_t chance = 0;
  for (ClassLabel c : kLabelOrder) chance += count_a[c] * count_b[c];
  if (chance == n * n) return agree == n ? 1.0 : 0.0;
  const double p_o = static_cast<double>(agree) / static_cast<double>(n);
  const double p_e = static_cast<double>(chance) / (static_cast<double>(n) * static_cast<double>(n));
  return (p_o - p_e) / (1.0 - p_e);
}

std::vector<PairAgreement> agreement_report(std::span<const AnnotationTask> tasks) {
  std::set<std::string> annotators;
  for (const auto& task : tasks) {
    for (const auto& [id, claim] : task.claims) annotators.insert(id);
  }
  const std::vector<std::string> ids(annotators.begin(), annotators.end());
  std::vector<PairAgreement> report;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      std::vector<ClassLabel> labels_a, labels_b;
      for (const auto& task : tasks) {
        auto ca = task.claims.find(ids[i]);
        auto cb = task.claims.find(ids[j]);
        if (ca == task.claims.end() || cb == task.claims.end()) continue;
        if (!ca->second.label || !cb->second.label) continue;
        labels_a.push_back(*ca->second.label);
        labels_b.push_back(*cb->second.label);
      }
      PairAgreement pair{ids[i], ids[j], labels_a.size(), std::nullopt};
      if (!labels_a.empty()) pair.kappa = cohen_kappa(labels_a, labels_b);
      report.push_back(std::move(pair));
    }
  }
  return report;
}

FinalizeResult finalize_gold(std::span<const AnnotationTask> tasks, bool allow_partial) {
  FinalizeResult result;
  std::vector<AnnotationTask> done;
  for (const auto& task : tasks) {
    if (task.status != TaskStatus::kDone) {
      if (allow_partial) continue;
      fail(ErrorCode::kIncomplete, "task " + task.task_id + " is " +
                                       std::string(to_string(task.status)) + ", not done");
    }
    done.push_back(task);
    GoldExample gold;
    gold.tweet_id = task.tweet_id;
    gold.text = task.text;
    for (const auto& [id, claim] : task.claims) gold.annotator_labels[id] = claim.label;
    if (task.flagged()) {
      gold.excluded = true;
      if (task.unanimous()) gold.label = task.claims.begin()->second.label;
      if (task.adjudication && task.adjudication->label) gold.label = task.adjudication->label;
    } else if (task.unanimous()) {
      gold.label = task.claims.begin()->second.label;
    } else if (task.adjudication) {
      gold.label = task.adjudication->label;
      gold.annotator_labels[std::string(kAdjudicatorId)] = task.adjudication->label;
    } else {
      result.adjudication_queue.push_back(task.task_id);
      continue;
    }
    result.gold.push_back(std::move(gold));
  }
  result.kappa_report = agreement_report(done);
  return result;
}

json to_json(const GoldExample& gold) {
  json labels = json::object();
  for (const auto& [id, label] : gold.annotator_labels) labels[id] = label_json(label);
  return {{"tweet_id", gold.tweet_id},
          {"text", gold.text},
          {"label", label_json(gold.label)},
          {"annotator_labels", labels},
          {"excluded", gold.excluded}};
}

GoldExample gold_from_json(const json& row) {
  GoldExample gold;
  gold.tweet_id = row.at("tweet_id").get<std::string>();
  gold.text = row.value("text", std::string());
  if (row.contains("label")) gold.label = label_from(row["label"]);
  if (row.contains("annotator_labels")) {
    for (const auto& [id, value] : row["annotator_labels"].items()) {
      gold.annotator_labels[id] = label_from(value);
    }
  }
  gold.excluded = row.value("excluded", false);
  if (!gold.excluded && !gold.label) {
    fail(ErrorCode::kValidation, "gold example " + gold.tweet_id + " has no label");
  }
  return gold;
}

std::vector<GoldExample> read_gold(const std::filesystem::path& path) {
  std::vector<GoldExample> gold;
  jsonl::for_each(path, [&](const json& row, std::size_t line) {
    try {
      gold.push_back(gold_from_json(row));
    } catch (const std::exception& e) {
      fail(ErrorCode::kValidation, path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return gold;
}

void write_gold(const std::filesystem::path& path, std::span<const GoldExample> gold) {
  std::vector<json> rows;
  for (const auto& g : gold) rows.push_back(to_json(g));
  jsonl::write(path, rows);
}

json to_json(const DatasetSplit& split) {
  return {{"train_ids", split.train_ids}, {"test_ids", split.test_ids}, {"folds", split.folds},
          {"seed", split.seed},           {"ratio", split.ratio},       {"k", split.k}};
}

DatasetSplit split_from_json(const json& row) {
  DatasetSplit split;
  split.train_ids = row.at("train_ids").get<std::vector<std::string>>();
  split.test_ids = row.at("test_ids").get<std::vector<std::string>>();
  split.folds = row.at("folds").get<std::vector<std::vector<std::string>>>();
  split.seed = row.value("seed", std::uint64_t{0});
  split.ratio = row.value("ratio", 0.85);
  split.k = row.value("k", split.folds.size());
  return split;
}

DatasetSplit split_dataset(std::span<const GoldExample> gold, double ratio, std::size_t k,
                           std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    fail(ErrorCode::kValidation, "split ratio must lie strictly between 0 and 1");
  }
  if (k < 2) fail(ErrorCode::kValidation, "k must be at least 2");
  PerClass<std::vector<std::string>> members;
  std::size_t total = 0;
  for (const auto& example : gold) {
    if (example.excluded || !example.label) continue;
    members[*example.label].push_back(example.tweet_id);
    ++total;
  }
  if (total < k) {
    fail(ErrorCode::kValidation, "need at least k=" + std::to_string(k) + " usable examples, have " +
                                     std::to_string(total));
  }
  for (ClassLabel c : kLabelOrder) {
    const auto n = members[c].size();
    if (n > 0 && n < k) {
      fail(ErrorCode::kValidation, "class " + std::string(to_code(c)) + " has only " +
                                       std::to_string(n) + " examples, fewer than k=" +
                                       std::to_string(k) + "; use k <= " + std::to_string(n));
    }
  }

  Rng rng(seed);
  for (auto& list : members) rng.shuffle(std::span<std::string>(list));

  // Largest-remainder apportionment of the test set across classes.
  const auto test_size = static_cast<std::size_t>(std::llround(static_cast<double>(total) * (1.0 - ratio)));
  PerClass<std::size_t> test_count;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (ClassLabel c : kLabelOrder) {
    const double quota = static_cast<double>(test_size) * static_cast<double>(members[c].size()) /
                         static_cast<double>(total);
    test_count[c] = static_cast<std::size_t>(std::floor(quota));
    assigned += test_count[c];
    remainders.emplace_back(quota - std::floor(quota), index_of(c));
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  for (std::size_t i = 0; assigned < test_size && i < remainders.size(); ++i) {
    ++test_count[label_at(remainders[i].second)];
    ++assigned;
  }

  DatasetSplit split;
  split.seed = seed;
  split.ratio = ratio;
  split.k = k;
  split.folds.resize(k);
  std::size_t cursor = 0;
  for (ClassLabel c : kLabelOrder) {
    const auto& list = members[c];
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (i < test_count[c]) {
        split.test_ids.push_back(list[i]);
      } else {
        split.train_ids.push_back(list[i]);
        split.folds[cursor++ % k].push_back(list[i]);
      }
    }
  }
  return split;
}

std::vector<std::vector<std::string>> stratified_folds(std::span<const GoldExample> gold, std::size_t k,
                                                       std::uint64_t seed) {
  if (k < 2) fail(ErrorCode::kValidation, "k must be at least 2");
  PerClass<std::vector<std::string>> members;
  std::size_t total = 0;
  for (const auto& example : gold) {
    if (example.excluded || !example.label) continue;
    members[*example.label].push_back(example.tweet_id);
    ++total;
  }
  if (total < k) {
    fail(ErrorCode::kValidation, "need at least k=" + std::to_string(k) + " usable examples, have " +
                                     std::to_string(total));
  }
  Rng rng(seed);
  for (auto& list : members) rng.shuffle(std::span<std::string>(list));
  std::vector<std::vector<std::string>> folds(k);
  std::size_t cursor = 0;
  for (const auto& list : members) {
    for (const auto& id : list) folds[cursor++ % k].push_back(id);
  }
  return folds;
}

json to_json(const AnnotationTask& task) {
  json claims = json::object();
  for (const auto& [id, claim] : task.claims) claims[id] = claim_json(claim);
  json out = {{"task_id", task.task_id},
              {"tweet_id", task.tweet_id},
              {"text", task.text},
              {"silver", weak_label::to_json(task.silver)},
              {"required_annotators", task.required_annotators},
              {"status", std::string(to_string(task.status))},
              {"claims", claims}};
  out["adjudication"] = task.adjudication ? claim_json(*task.adjudication) : json(nullptr);
  return out;
}

json to_json(const AuditEntry& entry) {
  return {{"seq", entry.seq},
          {"task_id", entry.task_id},
          {"annotator", entry.annotator_id},
          {"label", label_json(entry.label)},
          {"multi_label_flag", entry.multi_label_flag},
          {"timestamp", entry.timestamp_ms}};
}

AnnotationStore::AnnotationStore(std::filesystem::path journal, std::chrono::milliseconds lease_timeout,
                                 Clock clock)
    : journal_path_(std::move(journal)), lease_timeout_(lease_timeout), clock_(std::move(clock)) {
  if (journal_path_.empty()) return;
  if (std::filesystem::exists(journal_path_)) replay();
  if (journal_path_.has_parent_path()) std::filesystem::create_directories(journal_path_.parent_path());
  journal_.open(journal_path_, std::ios::app);
  if (!journal_) fail(ErrorCode::kIo, "cannot open journal " + journal_path_.string());
}

std::int64_t AnnotationStore::now() const {
  if (clock_) return clock_();
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void AnnotationStore::replay() {
  jsonl::for_each(journal_path_, [&](const json& event, std::size_t line) {
    const auto kind = event.value("event", std::string());
    next_seq_ = std::max(next_seq_, event.value("seq", std::uint64_t{0}) + 1);
    if (kind == "task") {
      const json& t = event.at("task");
      AnnotationTask task;
      task.task_id = t.at("task_id").get<std::string>();
      task.tweet_id = t.at("tweet_id").get<std::string>();
      task.text = t.at("text").get<std::string>();
      task.silver = weak_label::silver_from_json(t.at("silver"));
      task.required_annotators = t.value("required_annotators", kDefaultRequiredAnnotators);
      by_id_.emplace(task.task_id, tasks_.size());
      tasks_.push_back(std::move(task));
    } else if (kind == "label") {
      const auto task_id = event.at("task_id").get<std::string>();
      auto it = by_id_.find(task_id);
      if (it == by_id_.end()) {
        fail(ErrorCode::kParse, journal_path_.string() + ":" + std::to_string(line) +
                                    ": label for unknown task " + task_id);
      }
      AuditEntry entry{event.value("seq", std::uint64_t{0}), task_id,
                       event.at("annotator").get<std::string>(), label_from(event.at("label")),
                       event.value("multi_label_flag", false), event.value("timestamp", std::int64_t{0})};
      submit_label(tasks_[it->second], entry.annotator_id, entry.label, entry.multi_label_flag,
                   entry.timestamp_ms);
      audit_.push_back(std::move(entry));
    } else {
      fail(ErrorCode::kParse, journal_path_.string() + ":" + std::to_string(line) +
                                  ": unknown journal event '" + kind + "'");
    }
  });
}

void AnnotationStore::append(const json& event) {
  if (!journal_.is_open()) return;
  journal_ << event.dump() << '\n';
  journal_.flush();
  if (!journal_) fail(ErrorCode::kIo, "journal write failed for " + journal_path_.string());
}

std::size_t AnnotationStore::add_tasks(std::span<const AnnotationTask> tasks) {
  std::unique_lock lock(mutex_);
  std::size_t added = 0;
  for (const auto& task : tasks) {
    if (by_id_.contains(task.task_id)) continue;
    AnnotationTask fresh = task;
    fresh.claims.clear();
    fresh.leases.clear();
    fresh.adjudication.reset();
    fresh.status = TaskStatus::kOpen;
    append({{"seq", next_seq_++},
            {"event", "task"},
            {"task", {{"task_id", fresh.task_id},
                      {"tweet_id", fresh.tweet_id},
                      {"text", fresh.text},
                      {"silver", weak_label::to_json(fresh.silver)},
                      {"required_annotators", fresh.required_annotators}}}});
    by_id_.emplace(fresh.task_id, tasks_.size());
    tasks_.push_back(std::move(fresh));
    ++added;
  }
  return added;
}

std::optional<AnnotationTask> AnnotationStore::claim_next(const std::string& annotator_id) {
  if (annotator_id.empty()) fail(ErrorCode::kValidation, "annotator id must not be empty");
  std::unique_lock lock(mutex_);
  const std::int64_t t = now();
  for (auto& task : tasks_) {
    std::erase_if(task.leases, [&](const auto& lease) { return t - lease.second > lease_timeout_.count(); });
    if (task.status != TaskStatus::kDone) refresh_status(task);
  }
  if (is_adjudicator(annotator_id)) {
    for (const auto& task : tasks_) {
      if (disputed(task) && !task.adjudication) return task;
    }
    return std::nullopt;
  }
  for (const auto& task : tasks_) {
    if (task.status != TaskStatus::kDone && task.leases.contains(annotator_id)) return task;
  }
  for (auto& task : tasks_) {
    if (task.status == TaskStatus::kDone) continue;
    if (task.claims.contains(annotator_id)) continue;
    if (task.claims.size() + task.leases.size() >= task.required_annotators) continue;
    task.leases[annotator_id] = t;
    refresh_status(task);
    return task;
  }
  return std::nullopt;
}

AnnotationTask AnnotationStore::submit(const std::string& task_id, const std::string& annotator_id,
                                       std::optional<ClassLabel> label, bool multi_label_flag) {
  std::unique_lock lock(mutex_);
  auto it = by_id_.find(task_id);
  if (it == by_id_.end()) fail(ErrorCode::kNotFound, "unknown task " + task_id);
  AnnotationTask& task = tasks_[it->second];
  const std::int64_t t = now();
  submit_label(task, annotator_id, label, multi_label_flag, t);
  AuditEntry entry{next_seq_++, task_id, annotator_id, label, multi_label_flag, t};
  append({{"seq", entry.seq},
          {"event", "label"},
          {"task_id", task_id},
          {"annotator", annotator_id},
          {"label", label_json(label)},
          {"multi_label_flag", multi_label_flag},
          {"timestamp", t}});
  audit_.push_back(std::move(entry));
  return task;
}

std::optional<AnnotationTask> AnnotationStore::find(const std::string& task_id) const {
  std::shared_lock lock(mutex_);
  auto it = by_id_.find(task_id);
  if (it == by_id_.end()) return std::nullopt;
  return tasks_[it->second];
}

std::vector<AnnotationTask> AnnotationStore::snapshot() const {
  std::shared_lock lock(mutex_);
  return tasks_;
}

std::vector<AuditEntry> AnnotationStore::audit() const {
  std::shared_lock lock(mutex_);
  return audit_;
}

std::size_t AnnotationStore::size() const {
  std::shared_lock lock(mutex_);
  return tasks_.size();
}

FinalizeResult AnnotationStore::finalize(bool allow_partial) const {
  std::shared_lock lock(mutex_);
  return finalize_gold(tasks_, allow_partial);
}

}  // namespace stancekit::annotation
