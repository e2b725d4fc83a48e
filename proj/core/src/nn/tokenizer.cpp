#include "stancekit/nn/tokenizer.hpp"

#include <fstream>
#include <limits>

#include "stancekit/error.hpp"
#include "stancekit/text.hpp"

namespace stancekit::nn {
namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Encoded wrap(std::vector<int> content, int begin, int end, std::size_t max_length) {
  if (max_length < 2) fail(ErrorCode::kValidation, "max_length must leave room for the boundary markers");
  if (content.size() > max_length - 2) content.resize(max_length - 2);
  Encoded out;
  out.content_tokens = content.size();
  out.ids.reserve(content.size() + 2);
  out.ids.push_back(begin);
  out.ids.insert(out.ids.end(), content.begin(), content.end());
  out.ids.push_back(end);
  out.mask.assign(out.ids.size(), 1);
  return out;
}

int require_id(const std::unordered_map<std::string, int>& index, const std::string& token) {
  auto it = index.find(token);
  if (it == index.end()) fail(ErrorCode::kConfig, "tokenizer vocabulary lacks " + token);
  return it->second;
}

}  // namespace

WordPieceTokenizer::WordPieceTokenizer(std::vector<std::string> vocab, bool lowercase)
    : vocab_(std::move(vocab)), lowercase_(lowercase) {
  for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], static_cast<int>(i));
  cls_ = require_id(index_, "[CLS]");
  sep_ = require_id(index_, "[SEP]");
  unk_ = require_id(index_, "[UNK]");
}

int WordPieceTokenizer::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? unk_ : it->second;
}

std::vector<std::string> WordPieceTokenizer::basic_tokenize(std::string_view input) const {
  // Clean, isolate CJK characters, then split on whitespace.
  std::u32string cleaned;
  for (char32_t cp : text::decode(input)) {
    if (cp == 0 || cp == 0xFFFD || text::is_control(cp)) continue;
    if (text::is_space(cp)) {
      cleaned.push_back(U' ');
    } else if (text::is_cjk(cp)) {
      cleaned.push_back(U' ');
      cleaned.push_back(cp);
      cleaned.push_back(U' ');
    } else {
      cleaned.push_back(cp);
    }
  }
  std::vector<std::string> out;
  for (std::string word : text::split_whitespace(text::encode(cleaned))) {
    if (lowercase_) word = text::strip_accents(text::to_lower(word));
    std::u32string current;
    for (char32_t cp : text::decode(word)) {
      if (text::is_punctuation(cp)) {
        if (!current.empty()) out.push_back(text::encode(current));
        current.clear();
        out.push_back(text::encode(std::u32string(1, cp)));
      } else {
        current.push_back(cp);
      }
    }
    if (!current.empty()) out.push_back(text::encode(current));
  }
  return out;
}

std::vector<std::string> WordPieceTokenizer::tokenize(std::string_view input) const {
  std::vector<std::string> out;
  for (const auto& word : basic_tokenize(input)) {
    const std::u32string chars = text::decode(word);
    if (chars.size() > 100) {
      out.push_back("[UNK]");
      continue;
    }
    std::vector<std::string> pieces;
    bool bad = false;
    for (std::size_t start = 0; start < chars.size();) {
      std::size_t end = chars.size();
      std::string found;
      while (start < end) {
        std::string candidate = text::encode(chars.substr(start, end - start));
        if (start > 0) candidate = "##" + candidate;
        if (index_.contains(candidate)) {
          found = std::move(candidate);
          break;
        }
        --end;
      }
      if (found.empty()) {
        bad = true;
        break;
      }
      pieces.push_back(std::move(found));
      start = end;
    }
    if (bad) {
      out.push_back("[UNK]");
    } else {
      out.insert(out.end(), pieces.begin(), pieces.end());
    }
  }
  return out;
}

Encoded WordPieceTokenizer::encode(std::string_view input, std::size_t max_length) const {
  std::vector<int> ids;
  for (const auto& token : tokenize(input)) ids.push_back(id(token));
  return wrap(std::move(ids), cls_, sep_, max_length);
}

nlohmann::json WordPieceTokenizer::to_json() const {
  return {{"type", "wordpiece"}, {"lowercase", lowercase_}, {"vocab", vocab_}};
}

ByteBpeTokenizer::ByteBpeTokenizer(std::unordered_map<std::string, int> vocab, std::vector<std::string> merges)
    : vocab_(std::move(vocab)), merges_(std::move(merges)) {
  for (std::size_t i = 0; i < merges_.size(); ++i) ranks_.emplace(merges_[i], i);
  int max_id = -1;
  for (const auto& [token, id] : vocab_) max_id = std::max(max_id, id);
  vocab_size_ = static_cast<std::size_t>(max_id + 1);
  bos_ = require_id(vocab_, "<s>");
  eos_ = require_id(vocab_, "</s>");
  unk_ = require_id(vocab_, "<unk>");

  // Printable bytes map to themselves, the rest to code points from 256 up.
  std::array<bool, 256> direct{};
  for (int b = '!'; b <= '~'; ++b) direct[b] = true;
  for (int b = 0xA1; b <= 0xAC; ++b) direct[b] = true;
  for (int b = 0xAE; b <= 0xFF; ++b) direct[b] = true;
  char32_t next = 256;
  for (int b = 0; b < 256; ++b) {
    std::string s;
    text::append_utf8(s, direct[b] ? static_cast<char32_t>(b) : next++);
    byte_encoder_[b] = s;
  }
}

std::vector<std::string> ByteBpeTokenizer::pre_tokenize(std::string_view input) {
  const std::u32string s = text::decode(input);
  const std::size_t n = s.size();
  auto other = [](char32_t cp) { return !text::is_space(cp) && !text::is_letter(cp) && !text::is_number(cp); };
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < n) {
    const char32_t cp = s[i];
    std::size_t j = i;
    if (cp == U'\'' && i + 1 < n) {
      const char32_t a = s[i + 1];
      const char32_t b = i + 2 < n ? s[i + 2] : 0;
      if (a == U's' || a == U't' || a == U'm' || a == U'd') {
        j = i + 2;
      } else if ((a == U'r' && b == U'e') || (a == U'v' && b == U'e') || (a == U'l' && b == U'l')) {
        j = i + 3;
      }
    }
    if (j == i) {
      std::size_t k = i;
      if (cp == U' ' && i + 1 < n && !text::is_space(s[i + 1])) k = i + 1;
      const char32_t head = s[k];
      if (text::is_letter(head)) {
        j = k;
        while (j < n && text::is_letter(s[j])) ++j;
      } else if (text::is_number(head)) {
        j = k;
        while (j < n && text::is_number(s[j])) ++j;
      } else if (other(head)) {
        j = k;
        while (j < n && other(s[j])) ++j;
      } else {
        // Whitespace run; leave the last one for the next token unless the
        // run ends the string.
        j = i;
        while (j < n && text::is_space(s[j])) ++j;
        if (j < n && j - i > 1) --j;
      }
    }
    out.push_back(text::encode(s.substr(i, j - i)));
    i = j;
  }
  return out;
}

std::vector<std::string> ByteBpeTokenizer::bpe(const std::string& word) const {
  std::vector<std::string> parts;
  for (std::size_t i = 0; i < word.size();) {
    const auto c = static_cast<unsigned char>(word[i]);
    const std::size_t len = c < 0x80 ? 1 : c < 0xE0 ? 2 : c < 0xF0 ? 3 : 4;
    parts.push_back(word.substr(i, len));
    i += len;
  }
  while (parts.size() > 1) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    std::string best_a, best_b;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      auto it = ranks_.find(parts[i] + " " + parts[i + 1]);
      if (it != ranks_.end() && it->second < best) {
        best = it->second;
        best_a = parts[i];
        best_b = parts[i + 1];
      }
    }
    if (best == std::numeric_limits<std::size_t>::max()) break;
    std::vector<std::string> merged;
    for (std::size_t i = 0; i < parts.size();) {
      if (i + 1 < parts.size() && parts[i] == best_a && parts[i + 1] == best_b) {
        merged.push_back(best_a + best_b);
        i += 2;
      } else {
        merged.push_back(parts[i++]);
      }
    }
    parts = std::move(merged);
  }
  return parts;
}

std::vector<std::string> ByteBpeTokenizer::tokenize(std::string_view input) const {
  std::vector<std::string> out;
  for (const auto& piece : pre_tokenize(input)) {
    std::string mapped;
    for (unsigned char b : piece) mapped += byte_encoder_[b];
    for (auto& token : bpe(mapped)) out.push_back(std::move(token));
  }
  return out;
}

Encoded ByteBpeTokenizer::encode(std::string_view input, std::size_t max_length) const {
  std::vector<int> ids;
  for (const auto& token : tokenize(input)) {
    auto it = vocab_.find(token);
    ids.push_back(it == vocab_.end() ? unk_ : it->second);
  }
  return wrap(std::move(ids), bos_, eos_, max_length);
}

nlohmann::json ByteBpeTokenizer::to_json() const {
  return {{"type", "byte_bpe"}, {"vocab", vocab_}, {"merges", merges_}};
}

HashTokenizer::HashTokenizer(std::size_t vocab_size, std::uint64_t seed) : vocab_size_(vocab_size), seed_(seed) {
  if (vocab_size < 8) fail(ErrorCode::kConfig, "hash tokenizer needs a vocabulary of at least 8");
}

std::vector<std::string> HashTokenizer::tokenize(std::string_view input) const {
  return text::match_tokens(text::to_lower(input));
}

Encoded HashTokenizer::encode(std::string_view input, std::size_t max_length) const {
  std::vector<int> ids;
  for (const auto& token : tokenize(input)) {
    ids.push_back(static_cast<int>(4 + fnv1a(token, 1469598103934665603ULL ^ seed_) % (vocab_size_ - 4)));
  }
  return wrap(std::move(ids), 2, 3, max_length);
}

nlohmann::json HashTokenizer::to_json() const {
  return {{"type", "hash"}, {"vocab_size", vocab_size_}, {"seed", seed_}};
}

std::unique_ptr<Tokenizer> tokenizer_from_json(const nlohmann::json& spec) {
  const auto type = spec.at("type").get<std::string>();
  if (type == "wordpiece") {
    return std::make_unique<WordPieceTokenizer>(spec.at("vocab").get<std::vector<std::string>>(),
                                                spec.value("lowercase", true));
  }
  if (type == "byte_bpe") {
    return std::make_unique<ByteBpeTokenizer>(spec.at("vocab").get<std::unordered_map<std::string, int>>(),
                                              spec.at("merges").get<std::vector<std::string>>());
  }
  if (type == "hash") {
    return std::make_unique<HashTokenizer>(spec.at("vocab_size").get<std::size_t>(),
                                           spec.value("seed", std::uint64_t{0}));
  }
  fail(ErrorCode::kConfig, "unknown tokenizer type " + type);
}

std::vector<std::string> read_wordpiece_vocab(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::string> vocab;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.push_back(line);
  }
  return vocab;
}

}  // namespace stancekit::nn
