#pragma once

#include <stdexcept>
#include <string>

namespace mtnet {

// Bad caller input: malformed shapes, out-of-range values, non-finite numbers.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input is well-formed but the requested quantity is not unique
// (e.g. nearest rotation of a rank-1 matrix).
class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss, probe point or gradient during a numeric procedure.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation applied to an object in the wrong state (e.g. double activation).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A metric has no defined value for the given input (e.g. MAE over zero pairs).
class UndefinedMetric : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mtnet
