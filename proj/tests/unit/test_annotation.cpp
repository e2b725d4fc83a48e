#include <gtest/gtest.h>

#include <set>
#include <thread>

#include "stancekit/annotation.hpp"
#include "stancekit/error.hpp"
#include "test_support.hpp"

namespace stancekit::annotation {
namespace {

using weak_label::SilverLabel;

std::vector<AnnotationTask> make_tasks(std::size_t n, std::size_t abstain_every = 0) {
  std::vector<SilverLabel> silver;
  std::unordered_map<std::string, std::string> texts;
  for (std::size_t i = 0; i < n; ++i) {
    SilverLabel s;
    s.tweet_id = "tw" + std::to_string(i);
    if (abstain_every == 0 || i % abstain_every != 0) s.label = ClassLabel::kGeneric;
    silver.push_back(s);
    texts[s.tweet_id] = "text " + std::to_string(i);
  }
  return create_tasks(silver, texts);
}

// Textbook kappa from the contingency table, in floating point.
double oracle_kappa(const std::vector<ClassLabel>& a, const std::vector<ClassLabel>& b) {
  double table[kNumClasses][kNumClasses] = {};
  for (std::size_t i = 0; i < a.size(); ++i) table[index_of(a[i])][index_of(b[i])] += 1.0;
  const double n = static_cast<double>(a.size());
  double po = 0.0, pe = 0.0;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    po += table[i][i] / n;
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      row += table[i][j];
      col += table[j][i];
    }
    pe += (row / n) * (col / n);
  }
  return (po - pe) / (1.0 - pe);
}

TEST(CreateTasks, AbstainFirstAndIds) {
  const auto tasks = make_tasks(6, 3);
  ASSERT_EQ(tasks.size(), 6u);
  EXPECT_EQ(tasks[0].task_id, "T000001");
  EXPECT_TRUE(tasks[0].silver.abstained());
  EXPECT_TRUE(tasks[1].silver.abstained());
  EXPECT_FALSE(tasks[2].silver.abstained());
  EXPECT_EQ(tasks[0].tweet_id, "tw0");
  EXPECT_EQ(tasks[1].tweet_id, "tw3");
}

TEST(CreateTasks, MissingTextIsNotFound) {
  std::vector<SilverLabel> silver(1);
  silver[0].tweet_id = "x";
  try {
    create_tasks(silver, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotFound);
  }
}

TEST(SubmitLabel, LifecycleAndErrors) {
  auto task = make_tasks(1)[0];
  EXPECT_THROW(submit_label(task, "a", std::nullopt, false), Error);
  submit_label(task, "a", ClassLabel::kSympathy, false);
  EXPECT_NE(task.status, TaskStatus::kDone);
  try {
    submit_label(task, "a", ClassLabel::kSympathy, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicateSubmission);
  }
  submit_label(task, "b", ClassLabel::kAntipathy, false);
  EXPECT_EQ(task.status, TaskStatus::kDone);
  EXPECT_FALSE(task.unanimous());
  try {
    submit_label(task, "c", ClassLabel::kSympathy, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConflict);
  }
  submit_label(task, std::string(kAdjudicatorId), ClassLabel::kAntipathy, false);
  EXPECT_THROW(submit_label(task, std::string(kAdjudicatorId), ClassLabel::kAntipathy, false), Error);
}

TEST(SubmitLabel, AdjudicatorRejectedOnAgreedTask) {
  auto task = make_tasks(1)[0];
  submit_label(task, "a", ClassLabel::kSympathy, false);
  submit_label(task, "b", ClassLabel::kSympathy, false);
  try {
    submit_label(task, std::string(kAdjudicatorId), ClassLabel::kGeneric, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConflict);
  }
}

TEST(Kappa, KnownValues) {
  using C = ClassLabel;
  const std::vector<C> a = {C::kSympathy, C::kSympathy, C::kAntipathy, C::kAntipathy};
  const std::vector<C> b = {C::kSympathy, C::kAntipathy, C::kAntipathy, C::kAntipathy};
  EXPECT_NEAR(cohen_kappa(a, b), 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(cohen_kappa(a, a), 1.0);
  const std::vector<C> same(4, C::kGeneric);
  EXPECT_DOUBLE_EQ(cohen_kappa(same, same), 1.0);
  EXPECT_THROW(cohen_kappa(a, std::vector<C>(3, C::kGeneric)), Error);
  EXPECT_THROW(cohen_kappa({}, {}), Error);
}

TEST(Kappa, MatchesContingencyOracle) {
  Rng rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = 2 + rng.below(60);
    const auto classes = 2 + rng.below(4);
    std::vector<ClassLabel> a, b;
    for (std::uint64_t i = 0; i < n; ++i) {
      a.push_back(label_at(rng.below(classes)));
      b.push_back(rng.bernoulli(0.7) ? a.back() : label_at(rng.below(classes)));
    }
    const double got = cohen_kappa(a, b);
    double pe_num = 0.0;
    PerClass<int> ca{}, cb{};
    for (std::size_t i = 0; i < a.size(); ++i) {
      ++ca[a[i]];
      ++cb[b[i]];
    }
    for (ClassLabel c : kLabelOrder) pe_num += static_cast<double>(ca[c]) * cb[c];
    if (pe_num == static_cast<double>(n * n)) continue;  // degenerate, covered above
    ASSERT_NEAR(got, oracle_kappa(a, b), 1e-12);
    ASSERT_LE(got, 1.0 + 1e-12);
    ASSERT_NEAR(cohen_kappa(b, a), got, 1e-12);  // symmetric
  }
}

TEST(Finalize, UnanimousDisputedFlagged) {
  auto tasks = make_tasks(4);
  submit_label(tasks[0], "a", ClassLabel::kSympathy, false);
  submit_label(tasks[0], "b", ClassLabel::kSympathy, false);
  submit_label(tasks[1], "a", ClassLabel::kSympathy, false);
  submit_label(tasks[1], "b", ClassLabel::kAnimosity, false);
  submit_label(tasks[2], "a", ClassLabel::kSolidarity, true);
  submit_label(tasks[2], "b", std::nullopt, true);
  EXPECT_THROW(finalize_gold(tasks), Error);

  auto partial = finalize_gold(tasks, true);
  ASSERT_EQ(partial.adjudication_queue, std::vector<std::string>{tasks[1].task_id});
  ASSERT_EQ(partial.gold.size(), 2u);
  EXPECT_EQ(partial.gold[0].label, ClassLabel::kSympathy);
  EXPECT_TRUE(partial.gold[1].excluded);

  submit_label(tasks[1], std::string(kAdjudicatorId), ClassLabel::kAnimosity, false);
  submit_label(tasks[3], "a", ClassLabel::kGeneric, false);
  submit_label(tasks[3], "c", ClassLabel::kGeneric, false);
  const auto full = finalize_gold(tasks);
  EXPECT_TRUE(full.adjudication_queue.empty());
  ASSERT_EQ(full.gold.size(), 4u);
  EXPECT_EQ(full.gold[1].label, ClassLabel::kAnimosity);
  EXPECT_EQ(full.gold[1].annotator_labels.at(std::string(kAdjudicatorId)), ClassLabel::kAnimosity);
  for (const auto& g : full.gold) EXPECT_EQ(gold_from_json(to_json(g)), g);

  // a-b co-labeled tasks 0 and 1 (task 2 has a flag-only label from b).
  bool saw_ab = false;
  for (const auto& pair : full.kappa_report) {
    EXPECT_NE(pair.annotator_a, std::string(kAdjudicatorId));
    EXPECT_NE(pair.annotator_b, std::string(kAdjudicatorId));
    if (pair.annotator_a == "a" && pair.annotator_b == "b") saw_ab = true;
  }
  EXPECT_TRUE(saw_ab);
}

std::vector<GoldExample> synthetic_gold(const std::vector<std::size_t>& per_class) {
  std::vector<GoldExample> gold;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    for (std::size_t i = 0; i < per_class[c]; ++i) {
      GoldExample g;
      g.tweet_id = std::to_string(c) + "-" + std::to_string(i);
      g.label = label_at(c);
      gold.push_back(g);
    }
  }
  return gold;
}

TEST(Split, SizesStratificationAndPartition) {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng.below(5);
    std::vector<std::size_t> per_class(kNumClasses);
    for (auto& n : per_class) n = k + rng.below(80);
    auto gold = synthetic_gold(per_class);
    GoldExample excluded;
    excluded.tweet_id = "excluded";
    excluded.excluded = true;
    gold.push_back(excluded);
    const double ratio = 0.6 + 0.3 * rng.uniform();
    const auto split = split_dataset(gold, ratio, k, rng.next());

    std::size_t total = 0;
    for (auto n : per_class) total += n;
    ASSERT_EQ(split.test_ids.size(),
              static_cast<std::size_t>(std::llround(static_cast<double>(total) * (1.0 - ratio))));
    ASSERT_EQ(split.train_ids.size() + split.test_ids.size(), total);

    std::set<std::string> train(split.train_ids.begin(), split.train_ids.end());
    std::set<std::string> test(split.test_ids.begin(), split.test_ids.end());
    ASSERT_EQ(train.size(), split.train_ids.size());
    for (const auto& id : test) ASSERT_FALSE(train.contains(id));
    ASSERT_FALSE(train.contains("excluded") || test.contains("excluded"));

    // Per-class test counts within one of the exact proportional share.
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      std::size_t in_test = 0;
      for (const auto& id : split.test_ids) in_test += id.rfind(std::to_string(c) + "-", 0) == 0;
      const double quota = static_cast<double>(split.test_ids.size()) * per_class[c] / total;
      ASSERT_LE(std::abs(static_cast<double>(in_test) - quota), 1.0);
    }

    // Folds partition the training portion with sizes differing by <= 1.
    ASSERT_EQ(split.folds.size(), k);
    std::multiset<std::string> fold_ids;
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& fold : split.folds) {
      fold_ids.insert(fold.begin(), fold.end());
      lo = std::min(lo, fold.size());
      hi = std::max(hi, fold.size());
    }
    ASSERT_LE(hi - lo, 1u);
    ASSERT_EQ(std::set<std::string>(fold_ids.begin(), fold_ids.end()), train);
    ASSERT_EQ(fold_ids.size(), train.size());
  }
}

TEST(Split, DeterministicPerSeed) {
  const auto gold = synthetic_gold({30, 20, 25, 10, 15});
  const auto a = split_dataset(gold, 0.85, 5, 42);
  const auto b = split_dataset(gold, 0.85, 5, 42);
  const auto c = split_dataset(gold, 0.85, 5, 43);
  EXPECT_EQ(a.test_ids, b.test_ids);
  EXPECT_EQ(a.folds, b.folds);
  EXPECT_NE(a.test_ids, c.test_ids);
  const auto round = split_from_json(to_json(a));
  EXPECT_EQ(round.folds, a.folds);
  EXPECT_EQ(round.seed, 42u);
}

TEST(Split, TooFewExamplesForK) {
  const auto gold = synthetic_gold({30, 3, 25, 10, 15});
  try {
    split_dataset(gold, 0.85, 5, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
    EXPECT_NE(std::string(e.what()).find("k <= 3"), std::string::npos);
  }
  EXPECT_THROW(split_dataset(gold, 1.0, 5, 1), Error);
}

TEST(Store, ClaimLeasesAndRefetch) {
  std::int64_t clock = 0;
  AnnotationStore store({}, std::chrono::minutes(30), [&] { return clock; });
  store.add_tasks(make_tasks(2));
  const auto a1 = store.claim_next("a");
  ASSERT_TRUE(a1);
  EXPECT_EQ(store.claim_next("a")->task_id, a1->task_id);  // same lease
  const auto b1 = store.claim_next("b");
  EXPECT_EQ(b1->task_id, a1->task_id);  // second annotator on the same task
  const auto c1 = store.claim_next("c");
  ASSERT_TRUE(c1);
  EXPECT_NE(c1->task_id, a1->task_id);  // task 1 fully leased
  EXPECT_EQ(store.claim_next("d")->task_id, c1->task_id);
  EXPECT_FALSE(store.claim_next("e").has_value());

  clock += 31 * 60 * 1000;  // leases expire
  EXPECT_TRUE(store.claim_next("e").has_value());
}

TEST(Store, JournalReplayRestoresState) {
  testing::TempDir dir;
  const auto journal = dir / "journal.jsonl";
  {
    AnnotationStore store(journal);
    EXPECT_EQ(store.add_tasks(make_tasks(3)), 3u);
    store.submit("T000001", "a", ClassLabel::kSympathy, false);
    store.submit("T000001", "b", ClassLabel::kSympathy, false);
    store.submit("T000002", "a", std::nullopt, true);
  }
  AnnotationStore reopened(journal);
  EXPECT_EQ(reopened.size(), 3u);
  EXPECT_EQ(reopened.add_tasks(make_tasks(3)), 0u);
  EXPECT_EQ(reopened.find("T000001")->status, TaskStatus::kDone);
  EXPECT_EQ(reopened.audit().size(), 3u);
  EXPECT_EQ(reopened.find("T000002")->claims.at("a").multi_label_flag, true);
  EXPECT_THROW(reopened.submit("T000001", "a", ClassLabel::kSympathy, false), Error);
  EXPECT_THROW(reopened.submit("T999999", "a", ClassLabel::kSympathy, false), Error);
}

TEST(Store, ConcurrentSubmissionsNeverDoubleCount) {
  AnnotationStore store;
  store.add_tasks(make_tasks(20));
  std::atomic<int> accepted{0}, rejected{0};
  std::vector<std::jthread> workers;
  for (int w = 0; w < 6; ++w) {
    workers.emplace_back([&, w] {
      const std::string annotator = "ann" + std::to_string(w % 3);  // pairs of threads share an id
      for (int t = 1; t <= 20; ++t) {
        char id[16];
        std::snprintf(id, sizeof id, "T%06d", t);
        try {
          store.submit(id, annotator, ClassLabel::kGeneric, false);
          ++accepted;
        } catch (const Error&) {
          ++rejected;
        }
      }
    });
  }
  workers.clear();
  EXPECT_EQ(accepted.load(), 40);  // two labels per task
  EXPECT_EQ(rejected.load(), 80);
  for (const auto& task : store.snapshot()) {
    EXPECT_EQ(task.claims.size(), 2u);
    EXPECT_EQ(task.status, TaskStatus::kDone);
  }
  EXPECT_EQ(store.audit().size(), 40u);
}

}  // namespace
}  // namespace stancekit::annotation
