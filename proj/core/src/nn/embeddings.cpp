#include "stancekit/nn/embeddings.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "stancekit/error.hpp"
#include "stancekit/text.hpp"

namespace stancekit::nn {

StaticEmbeddings StaticEmbeddings::load_vec(const std::filesystem::path& path, std::size_t max_vocab,
                                            const std::unordered_set<std::string>& keep) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kModelLoad, "cannot open embeddings " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kModelLoad, "empty embeddings file " + path.string());
  std::size_t count = 0;
  StaticEmbeddings e;
  {
    std::istringstream header(line);
    if (!(header >> count >> e.dim_) || e.dim_ == 0) {
      fail(ErrorCode::kModelLoad, path.string() + ": expected a 'count dim' header");
    }
  }
  std::size_t rows = 0;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (max_vocab && rows >= max_vocab) break;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++rows;
    const auto space = line.find(' ');
    if (space == std::string::npos) fail(ErrorCode::kModelLoad, path.string() + ":" + std::to_string(lineno) + ": no vector");
    std::string token = line.substr(0, space);
    if (!keep.empty() && !keep.contains(token)) continue;
    if (e.index_.contains(token)) continue;
    const std::size_t base = e.table_.size();
    e.table_.resize(base + e.dim_);
    const char* p = line.data() + space;
    const char* end = line.data() + line.size();
    for (std::size_t d = 0; d < e.dim_; ++d) {
      while (p < end && *p == ' ') ++p;
      char* next = nullptr;
      const float v = std::strtof(p, &next);
      if (next == p) {
        fail(ErrorCode::kModelLoad, path.string() + ":" + std::to_string(lineno) + ": expected " +
                                        std::to_string(e.dim_) + " components");
      }
      e.table_[base + d] = v;
      p = next;
    }
    e.index_.emplace(std::move(token), base / e.dim_);
  }
  return e;
}

StaticEmbeddings StaticEmbeddings::hashed(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) fail(ErrorCode::kConfig, "embedding dimension must be positive");
  StaticEmbeddings e;
  e.dim_ = dim;
  e.hashed_ = true;
  e.seed_ = seed;
  return e;
}

StaticEmbeddings StaticEmbeddings::from_spec(const std::string& spec, std::size_t max_vocab) {
  if (spec == "mock") return hashed(300, 0);
  if (spec.rfind("mock:", 0) == 0) {
    std::size_t dim = 0;
    const auto tail = std::string_view(spec).substr(5);
    auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), dim);
    if (ec != std::errc() || ptr != tail.data() + tail.size()) fail(ErrorCode::kConfig, "bad embedding spec " + spec);
    return hashed(dim, 0);
  }
  return load_vec(spec, max_vocab);
}

bool StaticEmbeddings::row_for(std::string_view token, std::vector<float>& out) const {
  if (hashed_) {
    std::uint64_t h = 1469598103934665603ULL ^ seed_;
    for (unsigned char c : text::to_lower(token)) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    Rng rng(h);
    out.resize(dim_);
    for (auto& v : out) v = static_cast<float>(rng.uniform(-0.5, 0.5));
    return true;
  }
  auto it = index_.find(std::string(token));
  if (it == index_.end()) it = index_.find(text::to_lower(token));
  if (it == index_.end()) return false;
  out.assign(table_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_),
             table_.begin() + static_cast<std::ptrdiff_t>((it->second + 1) * dim_));
  return true;
}

template <typename T>
Matrix<T> StaticEmbeddings::lookup(const std::vector<std::string>& tokens) const {
  Matrix<T> out = Matrix<T>::Zero(static_cast<Eigen::Index>(tokens.size()), static_cast<Eigen::Index>(dim_));
  std::vector<float> row;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!row_for(tokens[i], row)) continue;
    for (std::size_t d = 0; d < dim_; ++d) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = row[d];
  }
  return out;
}

std::vector<std::string> StaticEmbeddings::tokenize(std::string_view input, std::size_t max_length) {
  auto tokens = text::match_tokens(input);
  if (tokens.size() > max_length) tokens.resize(max_length);
  return tokens;
}

template Matrix<float> StaticEmbeddings::lookup<float>(const std::vector<std::string>&) const;
template Matrix<double> StaticEmbeddings::lookup<double>(const std::vector<std::string>&) const;

}  // namespace stancekit::nn
