#include "ssicl/error.hpp"

namespace ssicl {

std::string_view to_string(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::invalid_argument: return "invalid_argument";
    case ErrorCategory::no_labeled_data: return "no_labeled_data";
    case ErrorCategory::undefined_estimator: return "undefined_estimator";
    case ErrorCategory::ill_conditioned: return "ill_conditioned";
    case ErrorCategory::training_failed: return "training_failed";
    case ErrorCategory::invalid_split: return "invalid_split";
    case ErrorCategory::empty_split: return "empty_split";
    case ErrorCategory::undefined_risk: return "undefined_risk";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::schema: return "schema";
    case ErrorCategory::io: return "io";
    case ErrorCategory::config: return "config";
  }
  return "unknown";
}

int exit_code(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::config: return 2;
    case ErrorCategory::io: return 3;
    case ErrorCategory::parse:
    case ErrorCategory::schema:
    case ErrorCategory::empty_split: return 4;
    case ErrorCategory::training_failed: return 5;
    default: return 1;
  }
}

Error::Error(ErrorCategory category, const std::string& message)
    : std::runtime_error(message), category_(category) {}

void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

}  // namespace ssicl
