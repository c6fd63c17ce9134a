#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace synclattice {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed arguments: shape mismatches, non-finite inputs, bad permutations.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// An analysis was asked to run outside its preconditions (e.g. bisection
// endpoints with the same classification, a start state off the polydiagonal).
class PreconditionFailure : public Error {
 public:
  using Error::Error;
};

class IntegrationFailure : public Error {
 public:
  IntegrationFailure(std::size_t node, double time, const std::string& what)
      : Error(what + " (node " + std::to_string(node) + ", t=" + std::to_string(time) + ")"),
        node_(node),
        time_(time) {}

  std::size_t node() const noexcept { return node_; }
  double time() const noexcept { return time_; }

 private:
  std::size_t node_;
  double time_;
};

}  // namespace synclattice
