#pragma once

#include <stdexcept>
#include <string>

namespace smoekit {

enum class ErrorCategory {
  validation,
  io,
  format,
  digest,
  version,
  convergence,
  degenerate,
  hash_mismatch,
  internal,
};

inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::validation: return "validation";
    case ErrorCategory::io: return "io";
    case ErrorCategory::format: return "format";
    case ErrorCategory::digest: return "digest";
    case ErrorCategory::version: return "version";
    case ErrorCategory::convergence: return "convergence";
    case ErrorCategory::degenerate: return "degenerate";
    case ErrorCategory::hash_mismatch: return "hash_mismatch";
    case ErrorCategory::internal: return "internal";
  }
  return "internal";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& detail)
      : std::runtime_error(detail), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void throw_validation(const std::string& detail) {
  throw Error(ErrorCategory::validation, detail);
}

}  // namespace smoekit
