#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "stancekit/random.hpp"

namespace stancekit::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("stancekit-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string pick(Rng& rng, const std::vector<std::string>& pool) {
  return pool[rng.below(pool.size())];
}

// Random tweet-like text mixing words, mentions, URLs, hashtags, emoji,
// accented letters and assorted whitespace.
inline std::string random_tweet(Rng& rng, std::size_t max_tokens = 12) {
  static const std::vector<std::string> words = {
      "migrants", "Refugees", "help", "border", "they", "we'll", "support", "illegal",
      "café", "naïve", "RT", "rt", "welcome", "deport", "the", "a", "children", "#refugees",
      "#Migrants", "😀", "🇺🇸", "100", "it's", "!", "?", ",", "Ünïcödé", "東京"};
  static const std::vector<std::string> specials = {
      "@bob", "@Alice_99", "https://t.co/abc", "http://example.com/x?y=1", "www.site.org/p",
      "e@mail.com", "<user>", "RT:", " ", "\t", "  ", "\n", "café"};
  static const std::vector<std::string> seps = {" ", " ", " ", "  ", "\t", "\n", "　"};
  std::string out;
  const auto n = rng.below(max_tokens + 1);
  for (std::uint64_t i = 0; i < n; ++i) {
    out += rng.bernoulli(0.25) ? pick(rng, specials) : pick(rng, words);
    out += pick(rng, seps);
  }
  return out;
}

}  // namespace stancekit::testing
