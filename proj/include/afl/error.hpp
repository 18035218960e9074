#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace afl {

// Base for everything the library throws. The CLI maps the subclasses onto
// exit codes: contract/format/config errors -> 2, numerical/rank errors -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller violated a precondition (shape mismatch, label out of range, ...).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(what) {}
};

class ConfigError : public ContractError {
 public:
  explicit ConfigError(const std::string& what) : ContractError(what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(what) {}
};

// A matrix that must be full rank / positive definite is not.
class RankError : public NumericalError {
 public:
  explicit RankError(const std::string& what) : NumericalError(what) {}
};

// Malformed binary file. offset is the byte position where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace afl
