#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace stancekit::corpus {

// An RFC 3339 instant. The source string is kept so records round-trip
// byte-for-byte through ingest.
struct Timestamp {
  std::int64_t epoch_ms = 0;
  std::string text;

  static Timestamp parse(std::string_view rfc3339);

  friend bool operator==(const Timestamp& a, const Timestamp& b) {
    return a.epoch_ms == b.epoch_ms && a.text == b.text;
  }
};

struct TweetRecord {
  std::string id;
  std::string text;
  Timestamp created_at;
  std::string lang;
  std::optional<std::string> country;  // ISO-3166 alpha code, upper case
  bool is_retweet = false;

  friend bool operator==(const TweetRecord&, const TweetRecord&) = default;
};

TweetRecord record_from_json(const nlohmann::json& row);
nlohmann::json to_json(const TweetRecord& record);

std::vector<TweetRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, std::span<const TweetRecord> records);

// NFC-normalizes, removes URLs, replaces @mentions with "<user>" and
// collapses whitespace. Case, emoji and '#' are preserved. Idempotent.
// An empty result means the record should be dropped.
std::string normalize_text(std::string_view raw);

enum class EntityKind { kLocation, kPerson, kOrg };

struct EntitySpan {
  std::size_t start = 0;  // code point offsets, half-open
  std::size_t end = 0;
  EntityKind kind = EntityKind::kLocation;
};

std::optional<EntityKind> parse_entity_kind(std::string_view name);

// Replaces every span by its placeholder ("<location>", "<person>",
// "<org>"). Overlapping, empty or out-of-bounds spans raise a validation
// Error.
std::string anonymize(std::string_view text, std::span<const EntitySpan> spans);

// Lowercased normalized text with "<user>" placeholders and a leading
// retweet marker removed.
std::string content_key(std::string_view text);

struct DedupResult {
  std::vector<TweetRecord> records;
  double removed_fraction = 0.0;
};

// Keeps the earliest record (by created_at, then input position) for each
// id and each content key. Output preserves input order.
DedupResult deduplicate(std::span<const TweetRecord> records);

struct CorpusStats {
  std::size_t record_count = 0;
  std::optional<double> mean_word_count;  // unset for an empty corpus
  std::map<std::string, double> country_histogram;
  std::size_t known_country_count = 0;
  double dedup_removed_fraction = 0.0;
};

CorpusStats corpus_stats(std::span<const TweetRecord> records,
                         double dedup_removed_fraction = 0.0);

nlohmann::json to_json(const CorpusStats& stats);

// Published geographic breakdown of the reference corpus, in percent.
struct CountryShare {
  std::string_view country;
  double percent;
};
inline constexpr CountryShare kReferenceCountryShares[] = {
    {"USA", 53.6}, {"UK", 18.4},      {"Canada", 4.1}, {"India", 3.9},
    {"Australia", 2.0}, {"Nigeria", 1.9}, {"Others", 16.1}};

struct IngestOptions {
  std::string language = "en";
};

struct IngestResult {
  std::vector<TweetRecord> records;
  std::size_t input_count = 0;
  std::size_t dropped_empty = 0;
  std::size_t dropped_language = 0;
  CorpusStats stats;
};

// normalize -> drop empty -> language filter -> deduplicate -> stats.
IngestResult ingest(std::vector<TweetRecord> raw, const IngestOptions& options = {});

}  // namespace stancekit::corpus
