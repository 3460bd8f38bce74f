#pragma once

#include <stdexcept>
#include <string>

namespace ltrc {

// Error taxonomy mirrored by the CLI exit codes: validation-class errors
// (validation, parse, schema) map to 2, routing to 3, numeric to 4.
struct validation_error : std::runtime_error {
  explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct parse_error : validation_error {
  explicit parse_error(const std::string& msg) : validation_error(msg) {}
};

struct schema_error : validation_error {
  explicit schema_error(const std::string& msg) : validation_error(msg) {}
};

struct routing_error : std::runtime_error {
  explicit routing_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a censored record lies entirely past the point where the
// node-level survival estimate reaches zero; its log-rank score has no value.
struct undefined_score_error : numeric_error {
  explicit undefined_score_error(const std::string& msg) : numeric_error(msg) {}
};

}  // namespace ltrc
