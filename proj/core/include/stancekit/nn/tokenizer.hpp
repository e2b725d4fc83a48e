#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "stancekit/nn/tensor.hpp"

namespace stancekit::nn {

struct Encoded {
  std::vector<int> ids;
  Mask mask;                        // all ones; callers pad when batching
  std::size_t content_tokens = 0;   // tokens between the begin/end markers
};

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  // Begin marker, up to max_length - 2 content tokens, end marker.
  virtual Encoded encode(std::string_view text, std::size_t max_length) const = 0;
  virtual std::vector<std::string> tokenize(std::string_view text) const = 0;
  virtual std::size_t vocab_size() const = 0;
  virtual nlohmann::json to_json() const = 0;
};

// BERT uncased WordPiece: text cleanup, CJK and punctuation splitting,
// lower-casing with accent stripping, greedy longest-match subwords.
class WordPieceTokenizer : public Tokenizer {
 public:
  explicit WordPieceTokenizer(std::vector<std::string> vocab, bool lowercase = true);

  Encoded encode(std::string_view text, std::size_t max_length) const override;
  std::vector<std::string> tokenize(std::string_view text) const override;
  std::size_t vocab_size() const override { return vocab_.size(); }
  nlohmann::json to_json() const override;

  std::vector<std::string> basic_tokenize(std::string_view text) const;
  int id(std::string_view token) const;

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
  bool lowercase_;
  int cls_, sep_, unk_;
};

// GPT-2 style byte-level BPE as used by RoBERTa.
class ByteBpeTokenizer : public Tokenizer {
 public:
  ByteBpeTokenizer(std::unordered_map<std::string, int> vocab, std::vector<std::string> merges);

  Encoded encode(std::string_view text, std::size_t max_length) const override;
  std::vector<std::string> tokenize(std::string_view text) const override;
  std::size_t vocab_size() const override { return vocab_size_; }
  nlohmann::json to_json() const override;

  // Pre-tokenization equivalent to the GPT-2 split pattern.
  static std::vector<std::string> pre_tokenize(std::string_view text);

 private:
  std::vector<std::string> bpe(const std::string& word) const;

  std::unordered_map<std::string, int> vocab_;
  std::vector<std::string> merges_;
  std::unordered_map<std::string, std::size_t> ranks_;  // "a b" -> rank
  std::array<std::string, 256> byte_encoder_;
  std::size_t vocab_size_ = 0;
  int bos_, eos_, unk_;
};

// Hashes lower-cased match tokens into a fixed id range. Used with the
// miniature mock encoder; ids 0..3 are [PAD], [UNK], [CLS], [SEP].
class HashTokenizer : public Tokenizer {
 public:
  explicit HashTokenizer(std::size_t vocab_size, std::uint64_t seed = 0);

  Encoded encode(std::string_view text, std::size_t max_length) const override;
  std::vector<std::string> tokenize(std::string_view text) const override;
  std::size_t vocab_size() const override { return vocab_size_; }
  nlohmann::json to_json() const override;

 private:
  std::size_t vocab_size_;
  std::uint64_t seed_;
};

std::unique_ptr<Tokenizer> tokenizer_from_json(const nlohmann::json& spec);

// Reads a BERT vocab.txt (one token per line).
std::vector<std::string> read_wordpiece_vocab(const std::filesystem::path& path);

}  // namespace stancekit::nn
