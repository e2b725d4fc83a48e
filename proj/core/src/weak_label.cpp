#include "stancekit/weak_label.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <set>
#include <thread>

#include "stancekit/error.hpp"
#include "stancekit/jsonl.hpp"
#include "stancekit/text.hpp"

namespace stancekit::weak_label {
namespace {

constexpr char kJoin = '\x1f';

std::string join_tokens(std::span<const std::string> tokens) {
  std::string key;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) key.push_back(kJoin);
    key += tokens[i];
  }
  return key;
}

struct PhraseIndex {
  // joined token sequence -> (class, phrase position)
  std::unordered_map<std::string, std::vector<std::pair<ClassLabel, std::size_t>>> entries;
  std::size_t max_tokens = 0;
};

PhraseIndex build_index(const Lexicon& lexicon) {
  PhraseIndex index;
  for (ClassLabel label : kLabelOrder) {
    const auto& tokens = lexicon.phrase_tokens(label);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      index.entries[join_tokens(tokens[i])].emplace_back(label, i);
      index.max_tokens = std::max(index.max_tokens, tokens[i].size());
    }
  }
  return index;
}

struct MatchResult {
  Scores scores;
  PerClass<std::vector<std::string>> matched;
};

MatchResult match(std::string_view text, const Lexicon& lexicon, const PhraseIndex& index) {
  const std::vector<std::string> tokens = text::match_tokens(text::to_lower(text));
  PerClass<std::set<std::size_t>> hits;
  for (std::size_t start = 0; start < tokens.size(); ++start) {
    std::string key;
    const std::size_t longest = std::min(index.max_tokens, tokens.size() - start);
    for (std::size_t n = 1; n <= longest; ++n) {
      if (n > 1) key.push_back(kJoin);
      key += tokens[start + n - 1];
      auto it = index.entries.find(key);
      if (it == index.entries.end()) continue;
      for (const auto& [label, position] : it->second) hits[label].insert(position);
    }
  }
  MatchResult result;
  for (ClassLabel label : kLabelOrder) {
    result.scores[label] = static_cast<int>(hits[label].size());
    for (std::size_t position : hits[label]) {
      result.matched[label].push_back(lexicon.phrases(label)[position]);
    }
  }
  return result;
}

void add_phrases(Lexicon& lexicon, const std::string& class_name, const YAML::Node& node) {
  auto label = parse_label(class_name);
  if (!label) fail(ErrorCode::kValidation, "unknown class " + class_name);
  if (!node.IsSequence()) {
    fail(ErrorCode::kParse, "lexicon entry for class " + class_name + " must be a list of phrases");
  }
  for (std::size_t i = 0; i < node.size(); ++i) {
    if (!node[i].IsScalar()) {
      fail(ErrorCode::kParse, "lexicon entry " + class_name + "[" + std::to_string(i) +
                                  "] is not a string");
    }
    try {
      lexicon.add(*label, node[i].as<std::string>());
    } catch (const Error& e) {
      fail(e.code(), std::string(e.what()) + " (" + class_name + "[" + std::to_string(i) + "])");
    }
  }
}

}  // namespace

void Lexicon::add(ClassLabel label, std::string_view phrase) {
  std::string normalized = text::to_lower(text::collapse_whitespace(text::nfc(phrase)));
  if (normalized.empty()) fail(ErrorCode::kValidation, "empty phrase");
  if (text::count_words(normalized) > kMaxPhraseWords) {
    fail(ErrorCode::kValidation, "phrase '" + normalized + "' exceeds " +
                                     std::to_string(kMaxPhraseWords) + " words");
  }
  auto& list = entries_[label];
  if (std::find(list.begin(), list.end(), normalized) != list.end()) return;
  tokens_[label].push_back(text::match_tokens(normalized));
  list.push_back(std::move(normalized));
}

std::size_t Lexicon::size() const {
  std::size_t total = 0;
  for (const auto& list : entries_) total += list.size();
  return total;
}

Lexicon parse_lexicon(std::string_view document) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(document));
  } catch (const YAML::Exception& e) {
    fail(ErrorCode::kParse, std::string("malformed lexicon document: ") + e.what());
  }
  if (!root.IsMap()) fail(ErrorCode::kParse, "malformed lexicon document: expected a mapping");
  Lexicon lexicon;
  YAML::Node classes = root;
  if (root["classes"]) {
    classes = root["classes"];
    if (!classes.IsMap()) fail(ErrorCode::kParse, "malformed lexicon document: 'classes' must be a mapping");
  }
  if (root["version"]) lexicon.set_version(root["version"].as<std::string>());
  for (const auto& entry : classes) {
    const auto key = entry.first.as<std::string>();
    if (key == "version" || (key == "classes" && classes == root)) continue;
    add_phrases(lexicon, key, entry.second);
  }
  return lexicon;
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  try {
    return parse_lexicon(jsonl::read_text(path));
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

Scores score_classes(std::string_view text, const Lexicon& lexicon) {
  return match(text, lexicon, build_index(lexicon)).scores;
}

bool SilverLabel::zero_match() const {
  return std::all_of(scores.begin(), scores.end(), [](int s) { return s == 0; });
}

std::optional<ClassLabel> decide(const Scores& scores) {
  int best = 0;
  std::size_t best_count = 0;
  ClassLabel best_label = ClassLabel::kGeneric;
  for (ClassLabel label : kLabelOrder) {
    if (scores[label] > best) {
      best = scores[label];
      best_count = 1;
      best_label = label;
    } else if (scores[label] == best && best > 0) {
      ++best_count;
    }
  }
  if (best == 0) return ClassLabel::kGeneric;
  if (best_count > 1) return std::nullopt;
  return best_label;
}

SilverLabel silver_label(const corpus::TweetRecord& record, const Lexicon& lexicon) {
  MatchResult m = match(record.text, lexicon, build_index(lexicon));
  SilverLabel silver;
  silver.tweet_id = record.id;
  silver.scores = m.scores;
  silver.label = decide(m.scores);
  silver.matched_phrases = std::move(m.matched);
  silver.lexicon_version = lexicon.version();
  return silver;
}

LabeledCorpus label_corpus(std::span<const corpus::TweetRecord> records, const Lexicon& lexicon,
                           unsigned threads) {
  const PhraseIndex index = build_index(lexicon);
  LabeledCorpus out;
  out.silver.resize(records.size());
  const auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      MatchResult m = match(records[i].text, lexicon, index);
      SilverLabel& silver = out.silver[i];
      silver.tweet_id = records[i].id;
      silver.scores = m.scores;
      silver.label = decide(m.scores);
      silver.matched_phrases = std::move(m.matched);
      silver.lexicon_version = lexicon.version();
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(records.size())));
  if (threads <= 1) {
    work(0, records.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (records.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(records.size(), begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
  }
  for (const auto& silver : out.silver) {
    if (silver.abstained()) out.abstain_queue.push_back(silver.tweet_id);
  }
  return out;
}

std::string label_string(const std::optional<ClassLabel>& label) {
  return label ? std::string(to_code(*label)) : std::string("ABSTAIN");
}

nlohmann::json to_json(const SilverLabel& silver) {
  nlohmann::json scores = nlohmann::json::object();
  nlohmann::json matched = nlohmann::json::object();
  for (ClassLabel label : kLabelOrder) {
    scores[std::string(to_code(label))] = silver.scores[label];
    matched[std::string(to_code(label))] = silver.matched_phrases[label];
  }
  return {{"tweet_id", silver.tweet_id},
          {"scores", scores},
          {"label", label_string(silver.label)},
          {"matched_phrases", matched},
          {"lexicon_version", silver.lexicon_version}};
}

SilverLabel silver_from_json(const nlohmann::json& row) {
  SilverLabel silver;
  silver.tweet_id = row.at("tweet_id").get<std::string>();
  const auto label = row.at("label").get<std::string>();
  if (label != "ABSTAIN") silver.label = require_label(label);
  for (ClassLabel c : kLabelOrder) {
    const std::string code(to_code(c));
    if (row.contains("scores") && row["scores"].contains(code)) {
      silver.scores[c] = row["scores"][code].get<int>();
    }
    if (row.contains("matched_phrases") && row["matched_phrases"].contains(code)) {
      silver.matched_phrases[c] = row["matched_phrases"][code].get<std::vector<std::string>>();
    }
  }
  silver.lexicon_version = row.value("lexicon_version", std::string());
  return silver;
}

}  // namespace stancekit::weak_label
