#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace newsrecon {

/// Base for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated an operation precondition (bad month, empty query, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A persisted file does not match its declared binary or record format.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  explicit FormatError(const std::string& what) : Error(what) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_ = 0;
};

class CredentialError : public Error {
 public:
  using Error::Error;
};

class RateLimitError : public Error {
 public:
  using Error::Error;
};

class HttpError : public Error {
 public:
  HttpError(const std::string& what, int status) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class TimeoutError : public Error {
 public:
  using Error::Error;
};

/// Requested id (image, article, template) is not present.
class LookupError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace newsrecon
