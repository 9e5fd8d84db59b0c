// SPDX-License-Identifier: Apache-2.0

#ifndef DDVMS_TYPES_HPP
#define DDVMS_TYPES_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ddvms
{

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

using Index = Eigen::Index;

//
// Error hierarchy. Every failure surfaced by the library derives from Error so callers can
// catch by category (numerical vs. input) without string matching.
//
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Bad shapes or sizes handed to an operation.
class DimensionError : public Error
{
public:
  using Error::Error;
};

// Invalid parameters (negative viscosity, misaligned window, k out of range, ...).
class ConfigError : public Error
{
public:
  using Error::Error;
};

// Numerical stage failures.
class NumericalError : public Error
{
public:
  using Error::Error;
};

class NonConvergence : public NumericalError
{
public:
  NonConvergence(const std::string &what, int iterations, double residual)
    : NumericalError(what + " (iterations=" + std::to_string(iterations) +
                     ", residual=" + std::to_string(residual) + ")"),
      iterations(iterations), residual(residual)
  {
  }
  int iterations;
  double residual;
};

class SingularSystem : public NumericalError
{
public:
  using NumericalError::NumericalError;
};

class BlowUp : public NumericalError
{
public:
  BlowUp(const std::string &what, Index step)
    : NumericalError(what + " at step " + std::to_string(step)), step(step)
  {
  }
  Index step;
};

// Wraps a failure inside a time loop with the index of the failing step.
class StepFailure : public NumericalError
{
public:
  StepFailure(const std::string &what, Index step)
    : NumericalError("step " + std::to_string(step) + ": " + what), step(step)
  {
  }
  Index step;
};

// Not enough usable data points (e.g. for a regression).
class InsufficientData : public Error
{
public:
  using Error::Error;
};

// Malformed container files.
class FormatError : public Error
{
public:
  enum class Kind
  {
    io,
    bad_magic,
    version_mismatch,
    checksum,
    truncated,
    dimension,
  };
  FormatError(Kind kind, const std::string &what) : Error(what), kind(kind) {}
  Kind kind;
};

// External dataset schema violations, tagged with the offending field.
class SchemaError : public Error
{
public:
  SchemaError(const std::string &field, const std::string &what)
    : Error("field '" + field + "': " + what), field(field)
  {
  }
  std::string field;
};

}  // namespace ddvms

#endif  // DDVMS_TYPES_HPP
