#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace graphuil {

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  explicit ParseError(const std::string& what) : std::runtime_error(what), line_(0) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Operand shapes do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative solver stopped before reaching its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Training produced a non-finite loss term.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int epoch, const std::string& term)
      : std::runtime_error("non-finite loss term '" + term + "' at epoch " + std::to_string(epoch)),
        epoch_(epoch),
        term_(term) {}

  int epoch() const noexcept { return epoch_; }
  const std::string& term() const noexcept { return term_; }

 private:
  int epoch_;
  std::string term_;
};

}  // namespace graphuil
