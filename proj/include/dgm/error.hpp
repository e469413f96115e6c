#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dgm {

/// Malformed or invalid user input (environment files, rule files, flags).
/// The message names the offending field and index.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative solve stopped at its iteration cap before meeting tolerance.
class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string& what, double residual, std::size_t iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}

  double residual() const { return residual_; }
  std::size_t iterations() const { return iterations_; }

 private:
  double residual_;
  std::size_t iterations_;
};

/// Numerical probe could not be evaluated (boundary proximity, non-finite field values).
class ProbeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dgm
