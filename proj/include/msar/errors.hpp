#pragma once

#include <stdexcept>
#include <string>

namespace msar {

// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failures: a computation could not be completed at working
// precision. Callers that map errors to process exit codes should treat
// these separately from input/usage errors.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A matrix expected to be positive definite failed Cholesky factorization
// even after jitter escalation.
class NotPositiveDefinite : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Inverse-Wishart degrees of freedom must exceed dim - 1.
class DegreesOfFreedomTooSmall : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Dirichlet concentration parameters must all be positive.
class NonPositiveConcentration : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// The observed block of a Gaussian conditioning problem is singular.
class ObservedBlockSingular : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Every state had zero forward probability at some step.
class NumericalUnderflow : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// The data log likelihood became non-finite during sampling.
class NonFiniteLikelihood : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Contract violations on arguments passed by the caller.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class IndexOutOfRange : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class DimOutOfRange : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Conditioning a Gaussian on all of its coordinates leaves nothing to
// predict.
class EmptyComplement : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class EmptyInput : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class TooFewSamples : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Forecasts condition on the previous run, so run 1 of a day has no
// model-based predictive distribution.
class TargetBeforeSecondRun : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class EmptyBundle : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Problems with external inputs: files, schemas, configuration.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

class MissingLink : public DataError {
 public:
  using DataError::DataError;
};

class InconsistentHeadway : public DataError {
 public:
  using DataError::DataError;
};

class NonFiniteValue : public DataError {
 public:
  using DataError::DataError;
};

// A column with zero variance cannot be standardized.
class ConstantColumn : public DataError {
 public:
  using DataError::DataError;
};

class VersionMismatch : public DataError {
 public:
  using DataError::DataError;
};

// A structural invariant of a loaded or constructed object does not hold.
class InvariantViolation : public DataError {
 public:
  using DataError::DataError;
};

class MissingTruth : public DataError {
 public:
  using DataError::DataError;
};

class ConfigError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace msar
