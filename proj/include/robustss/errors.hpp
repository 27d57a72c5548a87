#pragma once

#include <stdexcept>
#include <string>

namespace robustss {

/// Malformed input: missing fields, wrong types, unknown tags.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed input that breaks a domain invariant. `invariant()` names it.
class InvariantError : public std::invalid_argument {
 public:
  InvariantError(std::string invariant, const std::string& message)
      : std::invalid_argument(invariant + ": " + message), invariant_(std::move(invariant)) {}

  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string invariant_;
};

/// A solver hit its iteration cap or lost numerical progress.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace robustss
