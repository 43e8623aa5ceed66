#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bnmc {

enum class ErrorCode {
  invalid_network,
  invalid_argument,
  parse_error,
  partial_assignment,
  enumeration_too_large,
  impossible_evidence,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_network: return "invalid_network";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::partial_assignment: return "partial_assignment";
    case ErrorCode::enumeration_too_large: return "enumeration_too_large";
    case ErrorCode::impossible_evidence: return "impossible_evidence";
  }
  return "unknown";
}

// Every error raised by the library carries a code so callers (the CLI in
// particular) can map failures onto exit statuses without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bnmc
