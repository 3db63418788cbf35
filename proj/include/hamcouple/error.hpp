#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hamcouple {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t offset, const std::string& message)
      : Error("syntax error at byte " + std::to_string(offset) + ": " + message), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnboundVariable : public Error {
 public:
  explicit UnboundVariable(const std::string& name) : Error("unbound variable '" + name + "'"), name_(name) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NonpositiveHamiltonian : public Error {
 public:
  using Error::Error;
};

/// Integration aborted: step underflow, non-finite state or blowup.
class IntegrationFailure : public Error {
 public:
  enum class Kind { StepUnderflow, NonfiniteState, Blowup, TooManySteps, Accuracy };
  IntegrationFailure(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class OriginTooClose : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class MissingDecomposition : public Error {
 public:
  MissingDecomposition() : Error("system has no decomposition data (H1, H2, Q)") {}
};

class RhoTooSmall : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

class IntegrationOverflow : public Error {
 public:
  using Error::Error;
};

}  // namespace hamcouple
