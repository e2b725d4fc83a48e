#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stancekit/corpus.hpp"
#include "stancekit/labels.hpp"

namespace stancekit::weak_label {

inline constexpr std::size_t kMaxPhraseWords = 6;

// Per-class aspect phrases for distant supervision. Phrases are stored
// lower-cased and whitespace-normalized, in first-seen order.
class Lexicon {
 public:
  Lexicon() = default;

  // `phrases` are normalized and deduplicated per class; an empty phrase
  // or one longer than kMaxPhraseWords words raises a validation Error.
  void add(ClassLabel label, std::string_view phrase);

  const std::vector<std::string>& phrases(ClassLabel label) const { return entries_[label]; }
  std::size_t size() const;

  const std::string& version() const { return version_; }
  void set_version(std::string version) { version_ = std::move(version); }

  // Token sequence for each phrase, aligned with phrases(label).
  const std::vector<std::vector<std::string>>& phrase_tokens(ClassLabel label) const {
    return tokens_[label];
  }

 private:
  PerClass<std::vector<std::string>> entries_;
  PerClass<std::vector<std::vector<std::string>>> tokens_;
  std::string version_ = "unversioned";
};

// Parses a YAML (or JSON) mapping of class name -> list of phrases. An
// optional top-level "version" string, and an optional "classes" wrapper
// mapping, are accepted.
Lexicon load_lexicon(const std::filesystem::path& path);
Lexicon parse_lexicon(std::string_view document);

using Scores = PerClass<int>;

// Number of distinct lexicon phrases of each class occurring in the
// lower-cased text as a contiguous token sequence.
Scores score_classes(std::string_view text, const Lexicon& lexicon);

struct SilverLabel {
  std::string tweet_id;
  Scores scores;
  std::optional<ClassLabel> label;  // nullopt is ABSTAIN
  PerClass<std::vector<std::string>> matched_phrases;
  std::string lexicon_version;

  bool abstained() const { return !label.has_value(); }
  // True when nothing matched and GEN was assigned as the fallback.
  bool zero_match() const;
};

// GEN on all-zero scores, ABSTAIN on a tie among nonzero maxima, the
// unique argmax otherwise.
std::optional<ClassLabel> decide(const Scores& scores);

SilverLabel silver_label(const corpus::TweetRecord& record, const Lexicon& lexicon);

struct LabeledCorpus {
  std::vector<SilverLabel> silver;
  std::vector<std::string> abstain_queue;
};

LabeledCorpus label_corpus(std::span<const corpus::TweetRecord> records, const Lexicon& lexicon,
                           unsigned threads = 1);

std::string label_string(const std::optional<ClassLabel>& label);  // "ABSTAIN" for nullopt
nlohmann::json to_json(const SilverLabel& silver);
SilverLabel silver_from_json(const nlohmann::json& row);

}  // namespace stancekit::weak_label
