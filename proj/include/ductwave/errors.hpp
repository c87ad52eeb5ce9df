#pragma once

#include <stdexcept>
#include <string>

namespace ductwave {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the documented domain of an operation.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or unsupported configuration.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Refractivity profile does not cover the vertical extent a solver needs.
class DomainCoverageError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or otherwise unusable numeric data.
class DataError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Stored file failed structural or checksum validation.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

/// A prediction set does not cover every case an evaluation requires.
class CompletenessError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage ran before the stage that produces its inputs.
class StageDependencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace ductwave
