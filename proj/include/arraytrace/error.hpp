#pragma once

#include <stdexcept>
#include <string>

namespace arraytrace {

// Exit codes used by the command line tool; each error class maps to one.
enum class ExitCode : int {
  kOk = 0,
  kValidation = 1,
  kIo = 2,
  kResource = 3,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept = 0;
};

// Input that violates a documented format or constraint.
class ValidationError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kValidation; }
};

// A caller broke an operation's precondition (empty slice, etc).
class ContractError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kValidation; }
};

class IoError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kIo; }
};

// Memory budget too small to make progress.
class ResourceError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kResource; }
};

}  // namespace arraytrace
