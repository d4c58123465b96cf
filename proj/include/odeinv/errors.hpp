#ifndef ODEINV_ERRORS_HPP
#define ODEINV_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace odeinv {

/// A forward solve produced a non-finite value.
class DivergenceError : public std::runtime_error {
public:
  DivergenceError(int step, const std::string &what)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  int step() const { return step_; }

private:
  int step_;
};

/// Factorization of a matrix that should be positive definite failed.
class LinearAlgebraError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Shapes or preconditions of a call do not conform.
class ContractError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// sigma_dif calibration is not possible from the given filter output.
class CalibrationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A finite-difference oracle could not be evaluated.
class OracleError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace odeinv

#endif // ODEINV_ERRORS_HPP
