#pragma once

#include <stdexcept>
#include <string>

namespace mcmclab {

/// Caller broke a documented precondition (dimension mismatch, unequal sizes, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed to converge or produced a non-finite result.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed command line or config file; the message names the offending token.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A distance curve never fell below the requested threshold.
class UnboundedTime : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An output file or directory could not be created or written.
class IoFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mcmclab
