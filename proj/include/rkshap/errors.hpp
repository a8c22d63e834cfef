#pragma once

#include <stdexcept>
#include <string>

namespace rkshap {

// Malformed or inconsistent caller input (shapes, ranges, schemas).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Requested problem size exceeds a hard cap.
class CapacityError : public InputError {
 public:
  using InputError::InputError;
};

// Numerical failure: a linear system could not be solved reliably.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularSystemError : public NumericError {
 public:
  SingularSystemError(const std::string& what, double final_jitter)
      : NumericError(what), final_jitter_(final_jitter) {}
  double final_jitter() const { return final_jitter_; }

 private:
  double final_jitter_;
};

// Coalition design does not pin down all attribution coefficients.
class IdentifiabilityError : public NumericError {
 public:
  using NumericError::NumericError;
};

class TimeoutError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rkshap
