#pragma once

#include <stdexcept>
#include <string>

namespace coexist {

/// A matrix expected to be (semi)definite is not.
class DefinitenessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of an operation (zero filter, bad index, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Scenario or file content violates a structural invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The radar constraints cannot be met.  `cell` is the index of the offending
/// protected cell in the scenario's cell list, or -1 when not attributable.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, int cell = -1)
      : std::runtime_error(what), cell_(cell) {}
  int cell() const noexcept { return cell_; }

 private:
  int cell_;
};

class PowerBudgetError : public InfeasibleError {
 public:
  using InfeasibleError::InfeasibleError;
};

}  // namespace coexist
