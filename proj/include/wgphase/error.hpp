// Exception hierarchy. InputError and its children map to "bad input" at the
// command line; FitError to "fit did not converge".
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace wgphase {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters, malformed files, schema violations.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Malformed data file; carries the 1-based line number.
class ParseError : public InputError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : InputError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Iterative method failed to settle; carries the last residual it saw.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : Error(what + " (last residual " + std::to_string(last_residual) + ")"),
        last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

/// Feedback loop diverged for the supplied gains.
class UnstableGainError : public Error {
 public:
  using Error::Error;
};

/// No interference fringe found in a trace.
class NoFringeError : public InputError {
 public:
  using InputError::InputError;
};

namespace detail {
inline void require(bool ok, const std::string& msg) {
  if (!ok) throw InputError(msg);
}
inline void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw InputError(std::string(name) + " must be finite");
}
}  // namespace detail

}  // namespace wgphase
