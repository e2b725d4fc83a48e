#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "stancekit/nn/tensor.hpp"

namespace stancekit::nn {

// Frozen word vectors. Tokens are looked up as-is, then lower-cased;
// anything else maps to the zero vector.
class StaticEmbeddings {
 public:
  StaticEmbeddings() = default;

  // fastText text format: a "count dim" header line, then "token v1 ... vd".
  // Keeps the first `max_vocab` rows (0 = all); when `keep` is non-empty,
  // only those tokens are loaded.
  static StaticEmbeddings load_vec(const std::filesystem::path& path, std::size_t max_vocab = 0,
                                   const std::unordered_set<std::string>& keep = {});

  // Deterministic pseudo-random vector per token, no out-of-vocabulary set.
  static StaticEmbeddings hashed(std::size_t dim, std::uint64_t seed);

  // "mock", "mock:DIM" or a path to a .vec file.
  static StaticEmbeddings from_spec(const std::string& spec, std::size_t max_vocab = 0);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return index_.size(); }
  bool hashed_mode() const { return hashed_; }

  template <typename T>
  Matrix<T> lookup(const std::vector<std::string>& tokens) const;

  // Tokenization used for static-embedding models: match tokens without
  // case folding, truncated to `max_length`.
  static std::vector<std::string> tokenize(std::string_view text, std::size_t max_length);

 private:
  bool row_for(std::string_view token, std::vector<float>& out) const;

  std::size_t dim_ = 0;
  bool hashed_ = false;
  std::uint64_t seed_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> table_;
};

}  // namespace stancekit::nn
