#pragma once

#include <stdexcept>
#include <string>

namespace sedd {

// Bad argument values: out-of-range indices, negative noise levels,
// malformed distributions, prompt collisions.
class ArgumentError : public std::invalid_argument {
 public:
  explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

// A state space or matrix dimension exceeds a hard capacity gate.
class CapacityError : public std::runtime_error {
 public:
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

// A score ratio is requested at a state of zero probability, or a
// mean-parameterized conversion hits a zero-probability transition.
class UndefinedScoreError : public std::runtime_error {
 public:
  explicit UndefinedScoreError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical integration left the probability simplex beyond tolerance.
class InstabilityError : public std::runtime_error {
 public:
  explicit InstabilityError(const std::string& what) : std::runtime_error(what) {}
};

// A sampler step produced no usable probability mass.
class SamplerError : public std::runtime_error {
 public:
  explicit SamplerError(const std::string& what) : std::runtime_error(what) {}
};

// Training aborted on a non-finite loss or gradient.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid or inconsistent run configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// File system level failures: missing files, short reads, write errors.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Text ingestion found characters outside the vocabulary.
class IngestionError : public ArgumentError {
 public:
  explicit IngestionError(const std::string& what) : ArgumentError(what) {}
};

// Checkpoint load failures. Each failure mode is a distinct type so callers
// can tell a stale format from a corrupted file from a short read.
class CheckpointError : public IoError {
 public:
  explicit CheckpointError(const std::string& what) : IoError(what) {}
};

class CheckpointFormatError : public CheckpointError {
 public:
  explicit CheckpointFormatError(const std::string& what) : CheckpointError(what) {}
};

class CheckpointVersionError : public CheckpointError {
 public:
  explicit CheckpointVersionError(const std::string& what) : CheckpointError(what) {}
};

class CheckpointChecksumError : public CheckpointError {
 public:
  explicit CheckpointChecksumError(const std::string& what) : CheckpointError(what) {}
};

class CheckpointTruncatedError : public CheckpointError {
 public:
  explicit CheckpointTruncatedError(const std::string& what) : CheckpointError(what) {}
};

}  // namespace sedd
