#pragma once

#include <stdexcept>
#include <string>

namespace hybridrank {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Input data that violates a documented invariant (non-finite values,
/// unsorted sparse entries, duplicate ids, ...).
class ValidationError : public Error {
  public:
    using Error::Error;
};

/// Shapes that do not line up: dense width, vocabulary size, list lengths.
class DimensionError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

/// Out-of-range hyperparameters (alpha, tau, k, missing priors).
class ConfigError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

/// A cost formula requested for a scheme that has no such term.
class NotApplicableError : public Error {
  public:
    using Error::Error;
};

/// Filesystem failures.
class IoError : public Error {
  public:
    using Error::Error;
};

/// Malformed on-disk or interchange data.
class FormatError : public Error {
  public:
    using Error::Error;
};

class VersionError : public FormatError {
  public:
    using FormatError::FormatError;
};

class TruncatedError : public FormatError {
  public:
    using FormatError::FormatError;
};

class ChecksumError : public FormatError {
  public:
    using FormatError::FormatError;
};

}  // namespace hybridrank
