#pragma once

#include <stdexcept>
#include <string>

namespace marginlab {

// Bad user input: malformed spec, out-of-range parameter, mismatched dataset.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The n x n Gram matrix of the noise block could not be factorized.
class SingularGramError : public std::runtime_error {
 public:
  SingularGramError(const std::string& what, double smallest_eigenvalue)
      : std::runtime_error(what), smallest_eigenvalue_(smallest_eigenvalue) {}

  double smallest_eigenvalue() const noexcept { return smallest_eigenvalue_; }

 private:
  double smallest_eigenvalue_;
};

// An iterative solver stopped without meeting its certificate.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double best_gap)
      : std::runtime_error(what), best_gap_(best_gap) {}

  double best_gap() const noexcept { return best_gap_; }

 private:
  double best_gap_;
};

// An internal invariant that should hold for every valid input was violated.
class StructuralError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace marginlab
