#pragma once

#include <stdexcept>
#include <string>

namespace coherent {

/// Base class for all library errors.
struct error : std::runtime_error {
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent input (bad spec, bad CSV, dimension mismatch).
struct input_error : error {
  using error::error;
};

/// Numerical failure (rank deficiency, non-PD weight matrix, blown tolerance).
struct numeric_error : error {
  using error::error;
};

}  // namespace coherent
