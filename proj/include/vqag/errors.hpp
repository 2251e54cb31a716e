#pragma once

#include <stdexcept>
#include <string>

namespace vqag {

/// Bad user input: missing files, malformed data, misaligned answers.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AlignmentError : InputError {
  using InputError::InputError;
};

/// Non-finite values during training or estimation.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition.
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

}  // namespace vqag
