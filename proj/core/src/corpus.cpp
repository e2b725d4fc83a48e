#include "stancekit/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <unordered_set>

#include "stancekit/error.hpp"
#include "stancekit/jsonl.hpp"
#include "stancekit/text.hpp"

namespace stancekit::corpus {
namespace {

using nlohmann::json;

// Howard Hinnant's days_from_civil.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool is_ascii_alnum(char32_t cp) {
  return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z') ||
         (cp >= U'0' && cp <= U'9');
}

bool is_handle_char(char32_t cp) { return is_ascii_alnum(cp) || cp == U'_'; }

char32_t ascii_lower(char32_t cp) {
  return (cp >= U'A' && cp <= U'Z') ? cp + (U'a' - U'A') : cp;
}

bool starts_with_ci(std::u32string_view s, std::size_t at, std::u32string_view prefix) {
  if (s.size() - at < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (ascii_lower(s[at + i]) != prefix[i]) return false;
  }
  return true;
}

std::string_view placeholder(EntityKind kind) {
  switch (kind) {
    case EntityKind::kLocation: return "<location>";
    case EntityKind::kPerson: return "<person>";
    case EntityKind::kOrg: return "<org>";
  }
  return "<location>";
}

}  // namespace

Timestamp Timestamp::parse(std::string_view s) {
  const auto bad = [&] { fail(ErrorCode::kParse, "invalid RFC 3339 timestamp '" + std::string(s) + "'"); };
  const auto number = [&](std::size_t pos, std::size_t len) {
    if (pos + len > s.size()) bad();
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, value);
    if (ec != std::errc() || ptr != s.data() + pos + len) bad();
    return value;
  };
  if (s.size() < 20 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != 't' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':') {
    bad();
  }
  const int year = number(0, 4), month = number(5, 2), day = number(8, 2);
  const int hour = number(11, 2), minute = number(14, 2), second = number(17, 2);
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60) {
    bad();
  }
  std::size_t pos = 19;
  std::int64_t millis = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    std::size_t digits = 0;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      if (digits < 3) millis = millis * 10 + (s[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) bad();
    for (; digits < 3; ++digits) millis *= 10;
  }
  std::int64_t offset_minutes = 0;
  if (pos < s.size() && (s[pos] == 'Z' || s[pos] == 'z')) {
    ++pos;
  } else if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
    const int sign = s[pos] == '+' ? 1 : -1;
    if (pos + 6 > s.size() || s[pos + 3] != ':') bad();
    offset_minutes = sign * (number(pos + 1, 2) * 60 + number(pos + 4, 2));
    pos += 6;
  } else {
    bad();
  }
  if (pos != s.size()) bad();
  const std::int64_t days = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
  const std::int64_t seconds = days * 86400 + hour * 3600 + minute * 60 + second - offset_minutes * 60;
  return Timestamp{seconds * 1000 + millis, std::string(s)};
}

TweetRecord record_from_json(const json& row) {
  const auto require_string = [&](const char* key) -> std::string {
    if (!row.contains(key) || !row[key].is_string()) {
      fail(ErrorCode::kValidation, std::string("record missing string field '") + key + "'");
    }
    return row[key].get<std::string>();
  };
  TweetRecord record;
  if (row.contains("id") && row["id"].is_number_integer()) {
    record.id = std::to_string(row["id"].get<std::int64_t>());
  } else {
    record.id = require_string("id");
  }
  if (record.id.empty()) fail(ErrorCode::kValidation, "record with empty id");
  record.text = require_string("text");
  record.created_at = Timestamp::parse(require_string("created_at"));
  record.lang = require_string("lang");
  if (row.contains("country") && row["country"].is_string() &&
      !row["country"].get<std::string>().empty()) {
    std::string country = row["country"].get<std::string>();
    std::transform(country.begin(), country.end(), country.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    record.country = country;
  }
  record.is_retweet = row.value("is_retweet", false);
  return record;
}

json to_json(const TweetRecord& record) {
  json row = {{"id", record.id},
              {"text", record.text},
              {"created_at", record.created_at.text},
              {"lang", record.lang},
              {"is_retweet", record.is_retweet}};
  row["country"] = record.country ? json(*record.country) : json(nullptr);
  return row;
}

std::vector<TweetRecord> read_records(const std::filesystem::path& path) {
  std::vector<TweetRecord> records;
  jsonl::for_each(path, [&](const json& row, std::size_t line) {
    try {
      records.push_back(record_from_json(row));
    } catch (const Error& e) {
      fail(e.code(), path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return records;
}

void write_records(const std::filesystem::path& path, std::span<const TweetRecord> records) {
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(to_json(r));
  jsonl::write(path, rows);
}

std::string normalize_text(std::string_view raw) {
  const std::u32string in = text::decode(text::nfc(raw));
  std::u32string out;
  out.reserve(in.size());
  const auto boundary = [&] { return out.empty() || !is_handle_char(out.back()); };
  for (std::size_t i = 0; i < in.size();) {
    const char32_t cp = in[i];
    if (boundary() && (starts_with_ci(in, i, U"http://") || starts_with_ci(in, i, U"https://") ||
                       starts_with_ci(in, i, U"www."))) {
      while (i < in.size() && !text::is_space(in[i])) ++i;
      continue;
    }
    if (cp == U'@' && boundary() && i + 1 < in.size() && is_handle_char(in[i + 1])) {
      ++i;
      while (i < in.size() && is_handle_char(in[i])) ++i;
      out += U"<user>";
      continue;
    }
    out.push_back(cp);
    ++i;
  }
  return text::nfc(text::collapse_whitespace(text::encode(out)));
}

std::optional<EntityKind> parse_entity_kind(std::string_view name) {
  if (name == "location") return EntityKind::kLocation;
  if (name == "person") return EntityKind::kPerson;
  if (name == "org") return EntityKind::kOrg;
  return std::nullopt;
}

std::string anonymize(std::string_view input, std::span<const EntitySpan> spans) {
  const std::u32string cps = text::decode(input);
  std::vector<EntitySpan> sorted(spans.begin(), spans.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& span = sorted[i];
    if (span.start >= span.end || span.end > cps.size()) {
      fail(ErrorCode::kValidation, "entity span [" + std::to_string(span.start) + "," +
                                       std::to_string(span.end) + ") out of bounds for text of length " +
                                       std::to_string(cps.size()));
    }
    if (i > 0 && sorted[i - 1].end > span.start) {
      fail(ErrorCode::kValidation, "entity spans overlap at offset " + std::to_string(span.start));
    }
  }
  std::string out;
  std::size_t cursor = 0;
  for (const auto& span : sorted) {
    out += text::encode(std::u32string_view(cps).substr(cursor, span.start - cursor));
    out += placeholder(span.kind);
    cursor = span.end;
  }
  out += text::encode(std::u32string_view(cps).substr(cursor));
  return out;
}

std::string content_key(std::string_view input) {
  std::string normalized = normalize_text(input);
  std::string stripped;
  stripped.reserve(normalized.size());
  for (std::size_t pos = 0; pos < normalized.size();) {
    if (normalized.compare(pos, 6, "<user>") == 0) {
      stripped.push_back(' ');
      pos += 6;
    } else {
      stripped.push_back(normalized[pos++]);
    }
  }
  std::vector<std::string> words = text::split_whitespace(text::to_lower(stripped));
  std::size_t first = 0;
  if (!words.empty() && (words[0] == "rt" || words[0] == "rt:")) {
    first = 1;
    if (words[0] == "rt" && words.size() > 1 && words[1] == ":") first = 2;
  }
  std::string key;
  for (std::size_t i = first; i < words.size(); ++i) {
    if (!key.empty()) key.push_back(' ');
    key += words[i];
  }
  return key;
}

DedupResult deduplicate(std::span<const TweetRecord> records) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].created_at.epoch_ms < records[b].created_at.epoch_ms;
  });
  std::unordered_set<std::string> seen_ids;
  std::unordered_set<std::string> seen_keys;
  std::vector<bool> keep(records.size(), false);
  for (std::size_t index : order) {
    const auto& record = records[index];
    const bool new_id = !seen_ids.contains(record.id);
    std::string key = content_key(record.text);
    const bool new_key = !seen_keys.contains(key);
    // A duplicate on either axis is dropped without claiming the other key.
    if (new_id && new_key) {
      keep[index] = true;
      seen_ids.insert(record.id);
      seen_keys.insert(std::move(key));
    }
  }
  DedupResult result;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (keep[i]) result.records.push_back(records[i]);
  }
  if (!records.empty()) {
    result.removed_fraction = static_cast<double>(records.size() - result.records.size()) /
                              static_cast<double>(records.size());
  }
  return result;
}

CorpusStats corpus_stats(std::span<const TweetRecord> records, double dedup_removed_fraction) {
  CorpusStats stats;
  stats.record_count = records.size();
  stats.dedup_removed_fraction = dedup_removed_fraction;
  std::map<std::string, std::size_t> country_counts;
  std::size_t total_words = 0;
  for (const auto& record : records) {
    total_words += text::count_words(normalize_text(record.text));
    if (record.country) {
      ++country_counts[*record.country];
      ++stats.known_country_count;
    }
  }
  if (!records.empty()) {
    stats.mean_word_count = static_cast<double>(total_words) / static_cast<double>(records.size());
  }
  for (const auto& [country, count] : country_counts) {
    stats.country_histogram[country] =
        static_cast<double>(count) / static_cast<double>(stats.known_country_count);
  }
  return stats;
}

json to_json(const CorpusStats& stats) {
  json out = {{"record_count", stats.record_count},
              {"known_country_count", stats.known_country_count},
              {"country_histogram", stats.country_histogram},
              {"dedup_removed_fraction", stats.dedup_removed_fraction}};
  out["mean_word_count"] = stats.mean_word_count ? json(*stats.mean_word_count) : json(nullptr);
  out["mean_word_count_defined"] = stats.mean_word_count.has_value();
  json reference = json::object();
  for (const auto& share : kReferenceCountryShares) {
    reference[std::string(share.country)] = share.percent / 100.0;
  }
  out["reference_country_share"] = {{"values", reference}, {"status", "reference, not reproduced"}};
  return out;
}

IngestResult ingest(std::vector<TweetRecord> raw, const IngestOptions& options) {
  IngestResult result;
  result.input_count = raw.size();
  std::vector<TweetRecord> kept;
  kept.reserve(raw.size());
  for (auto& record : raw) {
    record.text = normalize_text(record.text);
    if (record.text.empty()) {
      ++result.dropped_empty;
      continue;
    }
    if (!options.language.empty() && record.lang != options.language) {
      ++result.dropped_language;
      continue;
    }
    kept.push_back(std::move(record));
  }
  DedupResult dedup = deduplicate(kept);
  result.stats = corpus_stats(dedup.records, dedup.removed_fraction);
  result.records = std::move(dedup.records);
  return result;
}

}  // namespace stancekit::corpus
