#pragma once

#include <stdexcept>
#include <string>

namespace qdon {

// Error taxonomy shared by every module. The CLI maps each family to an exit
// code, so keep new failure kinds inside one of these branches.

struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// Raised when an input vector cannot be amplitude encoded.
struct NormalizationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Dimension or parameter-count disagreement between two objects.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A gate that leaves the representation a simulator can hold.
struct UnsupportedGateError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MissingInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qdon
