#pragma once

#include <stdexcept>
#include <string>

namespace flarecast {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, bad user input, unreadable or malformed data.
/// Maps to exit code 1 in the CLI.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure, non-convergence, or a broken internal invariant.
/// Maps to exit code 2 in the CLI.
class ComputeError : public Error {
 public:
  using Error::Error;
};

/// A flare class was passed to a task that does not contain it in either
/// its positive or negative set. Callers are expected to filter first.
class TaskUniverseError : public Error {
 public:
  using Error::Error;
};

/// Base for dataset loading failures. Subclasses distinguish the failure
/// mode; messages always name the offending instance or file.
class IngestError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// A referenced file is missing or unreadable.
class FileReadError : public IngestError {
 public:
  using IngestError::IngestError;
};

/// A CSV cell or row does not parse.
class CsvFormatError : public IngestError {
 public:
  using IngestError::IngestError;
};

/// Instances disagree on parameter names or timestep count.
class ShapeMismatchError : public IngestError {
 public:
  using IngestError::IngestError;
};

/// A parameter row has no finite values to repair from.
class MissingDataError : public IngestError {
 public:
  using IngestError::IngestError;
};

}  // namespace flarecast
