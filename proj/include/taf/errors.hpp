#pragma once

#include <stdexcept>
#include <string>

namespace taf {

// Error taxonomy used across the library. The CLI maps each class to a
// distinct exit code; library code throws, it never calls exit().

// Missing or unreadable files.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or emptiness violations (dimension mismatch, empty sequence, ...).
struct shape_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed file contents (bad magic, ragged CSV, unparsable label, ...).
struct format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf inputs, solver divergence, overflow.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace taf
