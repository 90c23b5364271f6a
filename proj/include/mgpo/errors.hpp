#pragma once
#include <stdexcept>
#include <string>

namespace mgpo {

// Operand shapes do not chain (matmul, forward, axpy alignment).
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse: stale cache, empty sequence, out-of-range argument.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values encountered where finite math was expected.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed config / checkpoint / CSV input.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mgpo
