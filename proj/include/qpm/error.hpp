#pragma once

#include <stdexcept>
#include <string>

namespace qpm {

/// Malformed or out-of-range input. The CLI maps this to exit code 2.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The requested process is physically impossible (no first-order QPM
/// period, undefined phase-matching orientation). CLI exit code 3.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical routine failed to converge.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qpm
