#ifndef AHB_ERROR_HPP
#define AHB_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ahb {

// Base of every error thrown by the library. The CLI maps subclasses onto
// exit codes, so keep the hierarchy flat.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A problem or solver description that cannot be instantiated.
class InvalidSpec : public Error {
 public:
  using Error::Error;
};

// Arguments outside an operation's domain (sample counts, exponents, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// An Objective lacks something the caller requires (gradient, f_*, prox...).
class CapabilityError : public Error {
 public:
  explicit CapabilityError(const std::string& field)
      : Error("objective lacks required capability: " + field), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, std::size_t iteration)
      : Error(what + " at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

class InnerSolveError : public Error {
 public:
  using Error::Error;
};

class DeskScaleLimit : public Error {
 public:
  using Error::Error;
};

class EmptyRegion : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace ahb

#endif  // AHB_ERROR_HPP
