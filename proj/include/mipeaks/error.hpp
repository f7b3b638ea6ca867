#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mipeaks {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite or otherwise malformed input data.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Mismatched sample counts or dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration (bad grid, bad layer index, partial predictor...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Degenerate data such as all-identical rows under the median heuristic.
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

// Not enough traces or steps to form the requested sample sets.
class InsufficientData : public Error {
 public:
  using Error::Error;
};

// Enumeration would exceed the state-count cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

// A trace lacks an annotation required by the caller (e.g. token ids).
class MissingAnnotation : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::int64_t step, const std::string& what)
      : Error(what), step_(step) {}
  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

// MITC / weight container parse failures. Each subclass names one failure.
class ParseError : public Error {
 public:
  using Error::Error;
};

class BadMagic : public ParseError {
 public:
  using ParseError::ParseError;
};

class BadVersion : public ParseError {
 public:
  using ParseError::ParseError;
};

class ChecksumMismatch : public ParseError {
 public:
  ChecksumMismatch(std::uint32_t expected, std::uint32_t actual, const std::string& what)
      : ParseError(what), expected_(expected), actual_(actual) {}
  std::uint32_t expected() const noexcept { return expected_; }
  std::uint32_t actual() const noexcept { return actual_; }

 private:
  std::uint32_t expected_;
  std::uint32_t actual_;
};

class Truncated : public ParseError {
 public:
  Truncated(std::uint64_t expected, std::uint64_t actual, const std::string& what)
      : ParseError(what), expected_(expected), actual_(actual) {}
  std::uint64_t expected_bytes() const noexcept { return expected_; }
  std::uint64_t actual_bytes() const noexcept { return actual_; }

 private:
  std::uint64_t expected_;
  std::uint64_t actual_;
};

// Size derived from the header disagrees with the payload (e.g. trailing bytes).
class SizeMismatch : public ParseError {
 public:
  using ParseError::ParseError;
};

}  // namespace mipeaks
