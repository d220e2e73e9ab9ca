#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nes {

enum class ErrorKind {
  invalid_argument,
  insufficient_data,
  degenerate_variance,
  no_valid_strata,
  undefined_f1,
  parse_error,
  row_count_mismatch,
  non_binary_treatment,
  non_finite_value,
  io_error,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::degenerate_variance: return "degenerate-variance";
    case ErrorKind::no_valid_strata: return "no-valid-strata";
    case ErrorKind::undefined_f1: return "undefined-f1";
    case ErrorKind::parse_error: return "parse-error";
    case ErrorKind::row_count_mismatch: return "row-count-mismatch";
    case ErrorKind::non_binary_treatment: return "non-binary-treatment";
    case ErrorKind::non_finite_value: return "non-finite-value";
    case ErrorKind::io_error: return "io-error";
  }
  return "unknown";
}

// Every failure raised by the library carries a kind so callers (the NES
// round table, the grid harness, the CLI exit code) can react per category.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

}  // namespace nes
