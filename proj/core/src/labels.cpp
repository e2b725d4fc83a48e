#include "stancekit/labels.hpp"

#include <algorithm>
#include <cctype>

#include "stancekit/error.hpp"

namespace stancekit {
namespace {

constexpr std::array<std::string_view, kNumClasses> kCodes = {"SYM", "ANT", "SOL",
                                                              "ANM", "GEN"};
constexpr std::array<std::string_view, kNumClasses> kNames = {
    "Sympathy", "Antipathy", "Solidarity", "Animosity", "Generic"};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

std::string_view to_code(ClassLabel label) { return kCodes[index_of(label)]; }

std::string_view to_name(ClassLabel label) { return kNames[index_of(label)]; }

std::optional<ClassLabel> parse_label(std::string_view text) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (iequals(text, kCodes[i]) || iequals(text, kNames[i])) return label_at(i);
  }
  return std::nullopt;
}

ClassLabel require_label(std::string_view text) {
  if (auto label = parse_label(text)) return *label;
  fail(ErrorCode::kValidation, "unknown class " + std::string(text));
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kValidation: return "validation_error";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kDuplicateSubmission: return "duplicate_submission";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kIncomplete: return "incomplete";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kConfig: return "config_error";
    case ErrorCode::kInputTooShort: return "input_too_short";
    case ErrorCode::kBackend: return "backend_error";
    case ErrorCode::kUndefinedMetric: return "undefined_metric";
    case ErrorCode::kModelLoad: return "model_load_error";
  }
  return "unknown";
}

}  // namespace stancekit
