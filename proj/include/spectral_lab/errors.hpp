#pragma once

#include <stdexcept>
#include <string>

namespace spectral_lab {

// Bad user input: malformed parameters, violated preconditions, coarse grids.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure failed to converge or lost an invariant.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A scalar map was evaluated outside the set where it is finite.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// The caller broke an operation contract (e.g. f(0) != 0 for a trace functional).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace spectral_lab
