#pragma once

#include <string>
#include <string_view>
#include <vector>

// Unicode helpers over UTF-8 strings, backed by ICU.
namespace stancekit::text {

std::string nfc(std::string_view utf8);
std::string to_lower(std::string_view utf8);

// NFD followed by removal of nonspacing marks ("café" -> "cafe").
std::string strip_accents(std::string_view utf8);

std::u32string decode(std::string_view utf8);
std::string encode(std::u32string_view code_points);
void append_utf8(std::string& out, char32_t cp);

bool is_space(char32_t cp);
bool is_letter(char32_t cp);
bool is_number(char32_t cp);
bool is_mark(char32_t cp);
bool is_control(char32_t cp);
bool is_punctuation(char32_t cp);
bool is_cjk(char32_t cp);

// Replaces every run of Unicode whitespace by one ASCII space and trims.
std::string collapse_whitespace(std::string_view utf8);

// Number of whitespace-separated tokens.
std::size_t count_words(std::string_view utf8);

std::vector<std::string> split_whitespace(std::string_view utf8);

// Word-boundary tokenization used for lexicon matching. Letters, digits,
// combining marks and word-internal apostrophes form word tokens; each
// other non-space code point is its own token; anonymization placeholders
// such as "<user>" stay atomic. The input is not case-folded.
std::vector<std::string> match_tokens(std::string_view utf8);

}  // namespace stancekit::text
