#pragma once

#include <stdexcept>
#include <string>

namespace qevt {

// Root of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Problem too large for exact enumeration or statevector simulation.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::string field = {})
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

  // Same diagnostics, message prefixed with the file name.
  ParseError in_file(const std::string& file) const {
    ParseError copy(*this);
    static_cast<Error&>(copy) = Error(file + ": " + what());
    return copy;
  }

 private:
  std::size_t line_;
  std::string field_;
};

// All extreme samples share one value; EVT has nothing to model.
class DegenerateSamples : public Error {
 public:
  using Error::Error;
};

class FitFailure : public Error {
 public:
  FitFailure(const std::string& what, std::string diagnostics)
      : Error(what), diagnostics_(std::move(diagnostics)) {}
  const std::string& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::string diagnostics_;
};

class SingularCovariance : public Error {
 public:
  using Error::Error;
};

class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

class EstimationImpossible : public Error {
 public:
  EstimationImpossible(const std::string& what, std::string failure_table)
      : Error(what), failure_table_(std::move(failure_table)) {}
  const std::string& failure_table() const noexcept { return failure_table_; }

 private:
  std::string failure_table_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace qevt
