#pragma once

#include <stdexcept>
#include <string>

namespace dpc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad shapes, out-of-range ids, invalid distributions.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The combinatorial state space exceeds the configured cap.
class StateSpaceTooLarge : public Error {
 public:
  using Error::Error;
};

/// The support of a state distribution does not form a connected neighbor graph.
class DisconnectedSupport : public Error {
 public:
  using Error::Error;
};

/// Acceptance limits too large for a state pair: a diagonal would go negative.
class InfeasibleLimits : public Error {
 public:
  using Error::Error;
};

/// An internal invariant was violated. Indicates a bug, not bad input.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace dpc
