#pragma once

#include <stdexcept>

namespace drowsy {

// Malformed or inconsistent input data: broken containers, invariant
// violations, shape mismatches.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: training divergence, non-convergent iteration,
// degenerate linear systems.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace drowsy
