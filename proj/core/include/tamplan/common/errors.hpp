#pragma once

#include <stdexcept>
#include <string>

namespace tamplan {

// Shape or dimension mismatch inside a tensor op.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A precondition of an operation was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid or infeasible configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An artifact was derived from inputs other than the ones supplied with it.
class ProvenanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file contents or unreadable/unwritable path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tamplan
