#include <gtest/gtest.h>

#include "stancekit/text.hpp"
#include "test_support.hpp"

namespace stancekit::text {
namespace {

TEST(Text, NfcComposes) {
  EXPECT_EQ(nfc("cafe\xCC\x81"), "caf\xC3\xA9");
  EXPECT_EQ(nfc("plain"), "plain");
}

TEST(Text, LowerAndStripAccents) {
  EXPECT_EQ(to_lower("MiGrAnTs ÜBER"), "migrants über");
  EXPECT_EQ(strip_accents("café naïve Ünïcödé"), "cafe naive Unicode");
}

TEST(Text, Utf8RoundTrip) {
  const std::string s = "a é 東京 😀";
  const auto cps = decode(s);
  EXPECT_EQ(cps.size(), 8u);
  EXPECT_EQ(encode(cps), s);
}

TEST(Text, CollapseWhitespace) {
  EXPECT_EQ(collapse_whitespace("  a \t b\n　c  "), "a b c");
  EXPECT_EQ(collapse_whitespace(" \t\n"), "");
}

TEST(Text, CountWords) {
  EXPECT_EQ(count_words(""), 0u);
  EXPECT_EQ(count_words("  one  two\tthree "), 3u);
}

TEST(Text, MatchTokensSplitsPunctuationAndHashtags) {
  const std::vector<std::string> expected = {"#", "refugees", "are", "welcome", "!", "we'll", "help",
                                             "<user>"};
  EXPECT_EQ(match_tokens("#refugees are welcome! we'll help <user>"), expected);
}

TEST(Text, MatchTokensKeepsCombiningMarksInWords) {
  const auto tokens = match_tokens("cafe\xCC\x81 ok");
  ASSERT_EQ(tokens.size(), 2u);
  EXPECT_EQ(tokens[0], "cafe\xCC\x81");
}

TEST(Text, MatchTokensNeverContainSpaces) {
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    const std::string s = testing::random_tweet(rng);
    for (const auto& tok : match_tokens(s)) {
      ASSERT_FALSE(tok.empty());
      for (char32_t cp : decode(tok)) ASSERT_FALSE(is_space(cp)) << s;
    }
  }
}

TEST(Text, CollapseIsIdempotent) {
  Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    const std::string once = collapse_whitespace(testing::random_tweet(rng));
    ASSERT_EQ(collapse_whitespace(once), once);
  }
}

}  // namespace
}  // namespace stancekit::text
