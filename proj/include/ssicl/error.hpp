#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ssicl {

/// Machine-readable failure classes. The CLI maps each to an exit code.
enum class ErrorCategory {
  invalid_argument,
  no_labeled_data,
  undefined_estimator,
  ill_conditioned,
  training_failed,
  invalid_split,
  empty_split,
  undefined_risk,
  parse,
  schema,
  io,
  config,
};

std::string_view to_string(ErrorCategory category) noexcept;

/// Process exit code used by the CLI for a given category (always nonzero).
int exit_code(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message);

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] void fail(ErrorCategory category, const std::string& message);

inline void require(bool condition, ErrorCategory category, const char* message) {
  if (!condition) fail(category, message);
}

}  // namespace ssicl
