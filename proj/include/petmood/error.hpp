#pragma once

#include <stdexcept>
#include <string>

namespace petmood {

// Exit codes shared by every CLI subcommand.
enum class ExitCode : int {
  ok = 0,
  validation = 1,
  io = 2,
  remote = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ExitCode::validation, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ExitCode::io, what) {}
};

class RemoteError : public Error {
 public:
  explicit RemoteError(const std::string& what) : Error(ExitCode::remote, what) {}
};

}  // namespace petmood
