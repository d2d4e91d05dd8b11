// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace losparse {

// Base class for every error this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes do not line up; the message names both shapes.
struct ShapeError : Error {
  using Error::Error;
};

// A compression budget or rank request is out of its accepted domain.
struct BudgetError : Error {
  using Error::Error;
};

// An iterative numeric routine failed to converge or produced non-finite
// values.
struct NumericError : Error {
  using Error::Error;
};

// A scalar argument is outside its accepted interval.
struct RangeError : Error {
  using Error::Error;
};

// An operation that needs at least one element received none.
struct EmptyInputError : Error {
  using Error::Error;
};

// A row, column, or layer reference points outside the addressed object.
struct IndexError : Error {
  using Error::Error;
};

// A run configuration is missing, malformed, or logically inconsistent.
struct ConfigError : Error {
  using Error::Error;
};

// A checkpoint or data file exists but its contents violate the format.
struct FormatError : Error {
  using Error::Error;
};

// The filesystem said no: missing file, failed write, failed rename.
struct IoError : Error {
  using Error::Error;
};

// Training diverged; carries the step at which the loss stopped being finite.
struct TrainingError : Error {
  std::size_t step;
  TrainingError(const std::string& what, std::size_t step_index)
      : Error(what), step(step_index) {}
};

}  // namespace losparse
