#include <gtest/gtest.h>

#include "stancekit/error.hpp"
#include "stancekit/text.hpp"
#include "stancekit/weak_label.hpp"
#include "test_support.hpp"

namespace stancekit::weak_label {
namespace {

Lexicon small_lexicon() {
  Lexicon lex;
  lex.add(ClassLabel::kSympathy, "human rights violations");
  lex.add(ClassLabel::kSympathy, "poor living conditions");
  lex.add(ClassLabel::kAntipathy, "economic burden");
  lex.add(ClassLabel::kSolidarity, "support migrants");
  lex.add(ClassLabel::kAnimosity, "go back");
  lex.add(ClassLabel::kAnimosity, "no refugees");
  return lex;
}

corpus::TweetRecord rec(std::string id, std::string text) {
  corpus::TweetRecord r;
  r.id = std::move(id);
  r.text = std::move(text);
  r.lang = "en";
  return r;
}

TEST(Lexicon, NormalizesAndDeduplicates) {
  Lexicon lex;
  lex.add(ClassLabel::kSolidarity, "  Support   MIGRANTS ");
  lex.add(ClassLabel::kSolidarity, "support migrants");
  ASSERT_EQ(lex.phrases(ClassLabel::kSolidarity).size(), 1u);
  EXPECT_EQ(lex.phrases(ClassLabel::kSolidarity)[0], "support migrants");
  EXPECT_EQ(lex.size(), 1u);
}

TEST(Lexicon, RejectsEmptyAndLongPhrases) {
  Lexicon lex;
  EXPECT_THROW(lex.add(ClassLabel::kSympathy, "   "), Error);
  EXPECT_THROW(lex.add(ClassLabel::kSympathy, "one two three four five six seven"), Error);
  EXPECT_NO_THROW(lex.add(ClassLabel::kSympathy, "one two three four five six"));
}

TEST(Lexicon, ParsesYamlWithVersionAndWrapper) {
  const auto flat = parse_lexicon("version: v9\nSYM: [human rights]\nanimosity:\n  - go back\n");
  EXPECT_EQ(flat.version(), "v9");
  EXPECT_EQ(flat.phrases(ClassLabel::kAnimosity).size(), 1u);
  const auto wrapped = parse_lexicon("classes:\n  SOL: [support migrants]\n");
  EXPECT_EQ(wrapped.phrases(ClassLabel::kSolidarity)[0], "support migrants");
  EXPECT_EQ(wrapped.version(), "unversioned");
}

TEST(Lexicon, UnknownClassIsNamed) {
  try {
    parse_lexicon("BAD: [x]\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("unknown class BAD"), std::string::npos);
  }
  EXPECT_THROW(parse_lexicon("SYM: [unclosed"), Error);
}

TEST(Lexicon, ShippedSeedLexiconLoads) {
  const auto lex = load_lexicon(std::string(STANCEKIT_SOURCE_DIR) + "/config/lexicon.yaml");
  EXPECT_GT(lex.size(), 10u);
  EXPECT_TRUE(lex.phrases(ClassLabel::kGeneric).empty());
  EXPECT_NE(lex.version(), "unversioned");
}

TEST(Score, WordBoundariesAndCase) {
  const auto lex = small_lexicon();
  const auto s = score_classes("We must SUPPORT migrants! Go back? no.", lex);
  EXPECT_EQ(s[ClassLabel::kSolidarity], 1);
  EXPECT_EQ(s[ClassLabel::kAnimosity], 1);
  EXPECT_EQ(s[ClassLabel::kSympathy], 0);
  // Substrings inside words are not matches.
  EXPECT_EQ(score_classes("gone backwards", lex)[ClassLabel::kAnimosity], 0);
  // Repeated phrase counts once.
  EXPECT_EQ(score_classes("go back, go back!", lex)[ClassLabel::kAnimosity], 1);
}

TEST(Decide, RulesForZeroTieAndArgmax) {
  Scores zero{};
  EXPECT_EQ(decide(zero), ClassLabel::kGeneric);
  Scores tie{};
  tie[ClassLabel::kSympathy] = 2;
  tie[ClassLabel::kAnimosity] = 2;
  EXPECT_FALSE(decide(tie).has_value());
  tie[ClassLabel::kAntipathy] = 3;
  EXPECT_EQ(decide(tie), ClassLabel::kAntipathy);
}

TEST(Silver, AbstainAndZeroMatch) {
  const auto lex = small_lexicon();
  const auto tie = silver_label(rec("1", "human rights violations and an economic burden"), lex);
  EXPECT_TRUE(tie.abstained());
  EXPECT_EQ(label_string(tie.label), "ABSTAIN");
  const auto none = silver_label(rec("2", "nothing relevant"), lex);
  EXPECT_EQ(none.label, ClassLabel::kGeneric);
  EXPECT_TRUE(none.zero_match());
  const auto sol = silver_label(rec("3", "support migrants now"), lex);
  EXPECT_EQ(sol.label, ClassLabel::kSolidarity);
  EXPECT_EQ(sol.matched_phrases[ClassLabel::kSolidarity], std::vector<std::string>{"support migrants"});
  EXPECT_EQ(silver_from_json(to_json(sol)).label, sol.label);
  EXPECT_EQ(silver_from_json(to_json(tie)).label, std::nullopt);
}

// Independent oracle: count phrases whose lower-cased token sequence
// appears as a contiguous window of the lower-cased text tokens.
Scores oracle_scores(const std::string& raw, const Lexicon& lex) {
  const auto tokens = text::match_tokens(text::to_lower(text::nfc(raw)));
  Scores out{};
  for (ClassLabel c : kLabelOrder) {
    for (const auto& phrase : lex.phrases(c)) {
      const auto p = text::match_tokens(phrase);
      bool found = false;
      for (std::size_t i = 0; !found && i + p.size() <= tokens.size(); ++i) {
        found = std::equal(p.begin(), p.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i));
      }
      out[c] += found ? 1 : 0;
    }
  }
  return out;
}

TEST(Score, MatchesWindowOracle) {
  const auto lex = small_lexicon();
  const std::vector<std::string> words = {"human", "rights", "violations", "economic", "burden", "support",
                                          "Migrants", "go", "back", "no", "refugees", "poor", "living",
                                          "conditions", "!", ",", "the", "#support"};
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    const auto n = rng.below(14);
    for (std::uint64_t j = 0; j < n; ++j) s += testing::pick(rng, words) + " ";
    const auto got = score_classes(s, lex);
    ASSERT_EQ(got, oracle_scores(s, lex)) << s;
    const auto label = decide(got);
    // Decision invariants.
    int best = 0;
    for (int v : got) best = std::max(best, v);
    if (best == 0) {
      ASSERT_EQ(label, ClassLabel::kGeneric);
    } else if (label) {
      ASSERT_EQ(got[*label], best);
    }
  }
}

TEST(LabelCorpus, ThreadedMatchesSerialAndQueuesAbstains) {
  const auto lex = small_lexicon();
  Rng rng(9);
  std::vector<corpus::TweetRecord> records;
  const std::vector<std::string> texts = {"support migrants", "go back economic burden", "hello",
                                          "no refugees, human rights violations"};
  for (int i = 0; i < 200; ++i) records.push_back(rec(std::to_string(i), testing::pick(rng, texts)));
  const auto serial = label_corpus(records, lex, 1);
  const auto threaded = label_corpus(records, lex, 4);
  ASSERT_EQ(serial.silver.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(serial.silver[i].tweet_id, records[i].id);
    EXPECT_EQ(serial.silver[i].label, threaded.silver[i].label);
  }
  EXPECT_EQ(serial.abstain_queue, threaded.abstain_queue);
  for (const auto& id : serial.abstain_queue) {
    EXPECT_TRUE(serial.silver[std::stoul(id)].abstained());
  }
}

}  // namespace
}  // namespace stancekit::weak_label
