#pragma once

#include <stdexcept>
#include <string>

namespace amn {

// Shape disagreement between operands.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Caller broke an operation's precondition (empty sequence, non-scalar loss, ...).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// NaN/Inf produced by a forward op, or a diverged training run.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file, missing data, out-of-vocabulary token at training time.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint magic/version mismatch or truncation.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace amn
