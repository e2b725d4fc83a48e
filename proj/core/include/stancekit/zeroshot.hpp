#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stancekit/annotation.hpp"
#include "stancekit/eval.hpp"
#include "stancekit/labels.hpp"

namespace stancekit::zeroshot {

enum class TagSet { kSingle, kDouble, kMulti };
std::optional<TagSet> parse_tag_set(std::string_view name);
std::string_view to_string(TagSet set);

struct Tag {
  std::string_view text;
  ClassLabel label;
};

// Candidate label descriptions for each class, grouped by tag set.
std::vector<Tag> tags(TagSet set);

inline constexpr std::string_view kDefaultTemplate = "This text expresses {tag} towards migrants.";

// Substitutes `tag` for every "{tag}" in `templ`; a template without the
// placeholder raises a config Error.
std::string hypothesis(std::string_view templ, std::string_view tag);

struct NliScores {
  double entailment = 0.0;
  double neutral = 0.0;
  double contradiction = 0.0;
};

// Scores one premise against several hypotheses.
class NliBackend {
 public:
  virtual ~NliBackend() = default;
  virtual std::vector<NliScores> score(std::string_view premise,
                                       std::span<const std::string> hypotheses) = 0;
  // True when score() may be called concurrently.
  virtual bool thread_safe() const { return false; }
  virtual std::string name() const = 0;
};

// Lookup table keyed by (premise, hypothesis). Missing pairs raise a
// backend Error unless a default entailment is configured.
class TableBackend : public NliBackend {
 public:
  void set(std::string premise, std::string hypothesis, double entailment);
  void set_default(double entailment) { default_ = entailment; }
  std::vector<NliScores> score(std::string_view premise, std::span<const std::string> hypotheses) override;
  bool thread_safe() const override { return true; }
  std::string name() const override { return "table"; }

 private:
  std::map<std::pair<std::string, std::string>, double, std::less<>> table_;
  std::optional<double> default_;
};

// Deterministic pseudo-scores from a hash of (premise, hypothesis). For
// wiring and smoke tests only; it carries no signal.
class HashBackend : public NliBackend {
 public:
  explicit HashBackend(std::uint64_t seed = 0) : seed_(seed) {}
  std::vector<NliScores> score(std::string_view premise, std::span<const std::string> hypotheses) override;
  bool thread_safe() const override { return true; }
  std::string name() const override { return "hash"; }

 private:
  std::uint64_t seed_;
};

// Client for an NLI scoring server. POSTs {"premise", "hypotheses"} to
// `url` and expects {"scores": [{"entailment", "neutral", "contradiction"}]}.
class HttpBackend : public NliBackend {
 public:
  explicit HttpBackend(std::string url, std::chrono::seconds timeout = std::chrono::seconds(60));
  ~HttpBackend() override;
  std::vector<NliScores> score(std::string_view premise, std::span<const std::string> hypotheses) override;
  bool thread_safe() const override { return true; }
  std::string name() const override { return "http:" + url_; }

 private:
  std::string url_;
  std::string origin_;
  std::string path_;
  std::chrono::seconds timeout_;
};

// "mock" / "hash", "http://host:port/path", or a table file (JSONL rows of
// {"premise", "hypothesis", "entailment"}).
std::unique_ptr<NliBackend> make_backend(std::string_view spec, std::uint64_t seed = 0);

enum class Aggregation { kMean, kMax };
std::optional<Aggregation> parse_aggregation(std::string_view name);

struct Config {
  TagSet tag_set = TagSet::kSingle;
  std::string hypothesis_template = std::string(kDefaultTemplate);
  Aggregation aggregation = Aggregation::kMean;
  unsigned threads = 1;
};

struct Result {
  ClassLabel label = ClassLabel::kGeneric;
  eval::ScoreRow probs{};  // normalized class scores
  eval::ScoreRow raw{};    // aggregated entailment per class
};

// Entailment per tag, aggregated per class, normalized to sum to one
// (uniform when every class scores zero). Ties go to the earlier class.
Result classify(std::string_view text, const Config& config, NliBackend& backend);

std::vector<eval::Prediction> predict(std::span<const annotation::GoldExample> examples,
                                      const Config& config, NliBackend& backend);

}  // namespace stancekit::zeroshot
