#pragma once

#include <stdexcept>
#include <string>

namespace ldbp {

// Block length / tap count does not fit the operation.
class SizeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad or incompatible configuration (rates, keys, ranges).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input that makes the operation meaningless, e.g. an all-zero block to be
// power-normalized.
class DegenerateInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf encountered during numerics, or training divergence.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable, truncated, or version-mismatched checkpoint.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ldbp
