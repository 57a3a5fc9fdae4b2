#pragma once

#include <stdexcept>
#include <string>

namespace pcma {

enum class ErrorCode {
  kDimensionMismatch,
  kNonFiniteEntry,
  kMissingInterceptColumn,
  kZeroVarianceColumn,
  kNonPositiveVariance,
  kRankDeficientDesign,
  kResampleDegenerate,
  kSingularInformation,
  kDegenerateScoreCollinearity,
  kInvalidArgument,
  kParseError,
  kIoError,
};

const char* to_string(ErrorCode code);

// All library failures are reported through this exception; `code()` lets
// callers (the CLI in particular) map them onto exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pcma
