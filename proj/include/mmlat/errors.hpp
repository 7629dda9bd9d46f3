#pragma once

#include <stdexcept>
#include <string>

namespace mmlat {

/// Invalid or inconsistent configuration values.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed on-disk data (trace files, JSON configs).
class ParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Iterative solver failed to converge within its iteration budget.
class ConvergenceError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A policy induced more than one recurrent class, so no unique steady state.
class NonUnichainError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure in a linear-algebra step (singular or ill-conditioned).
class SingularMatrixError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A requested operating point cannot be met by any admissible control
/// (power budget or reliability cap unattainable).
class InfeasibleError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace mmlat
