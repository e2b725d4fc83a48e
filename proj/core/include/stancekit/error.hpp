#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stancekit {

// Machine-readable error categories. The string forms are part of the
// HTTP and CLI error contracts.
enum class ErrorCode {
  kValidation,
  kNotFound,
  kDuplicateSubmission,
  kConflict,
  kIncomplete,
  kParse,
  kIo,
  kConfig,
  kInputTooShort,
  kBackend,
  kUndefinedMetric,
  kModelLoad,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace stancekit
