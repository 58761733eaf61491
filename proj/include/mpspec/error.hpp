#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mpspec {

// Base of every error raised by the library. exit_code() is what the CLI
// returns when the error escapes a subcommand.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 2; }
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller broke a documented precondition (unsorted input, negative time, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }
  int exit_code() const noexcept override { return 3; }

 private:
  std::string path_;
};

// Malformed time-tag stream. offset is the byte position of the problem.
class FormatError : public Error {
 public:
  FormatError(std::uint64_t offset, const std::string& what)
      : Error("byte " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }
  int exit_code() const noexcept override { return 4; }

 private:
  std::uint64_t offset_;
};

// Well-formed data that violates an ordering or range invariant.
class IntegrityError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

}  // namespace mpspec
