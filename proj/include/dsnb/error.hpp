#pragma once

#include <stdexcept>
#include <string>

namespace dsnb {

// Raised before any randomness is consumed when a distribution or model
// parameter lies outside its support.
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A factorization or solve failed beyond the jitter ladder. The message
// carries the step label and, inside the sampler, the iteration.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files: ragged panels, bad counts, non-finite covariates.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad command-line input. The message names the offending flag.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace dsnb
