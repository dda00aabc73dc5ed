#pragma once

#include <stdexcept>
#include <string>

namespace hdgmax {

/// Base class of every exception thrown by the library.
class error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class invalid_argument : public error {
public:
  using error::error;
};

/// Degenerate or inverted element geometry.
class geometry_error : public error {
public:
  using error::error;
};

/// Singular element-interior block during static condensation.
class condensation_error : public error {
public:
  condensation_error(std::size_t element, double condition_estimate)
    : error("condensation failed on element " + std::to_string(element) +
            " (estimated condition number " + std::to_string(condition_estimate) + ")"),
      element_(element), condition_(condition_estimate) {}

  std::size_t element() const noexcept { return element_; }
  double condition_estimate() const noexcept { return condition_; }

private:
  std::size_t element_;
  double condition_;
};

/// Local and global assembly disagree on kappa, tau or sign convention.
class configuration_error : public error {
public:
  using error::error;
};

/// Numerically singular global factorization. The scheme is uniquely solvable
/// for every mesh, order and wave number, so this always indicates a bug.
class scheme_bug : public error {
public:
  explicit scheme_bug(const std::string& what) : error("SCHEME BUG: " + what) {}
};

/// Krylov iteration did not reach the requested tolerance.
class not_converged : public error {
public:
  not_converged(const std::string& what, double best_residual)
    : error(what), best_residual_(best_residual) {}
  double best_residual() const noexcept { return best_residual_; }

private:
  double best_residual_;
};

/// Wraps a failure from one pipeline stage of the harness.
class stage_error : public error {
public:
  stage_error(std::string stage, const std::string& what)
    : error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

private:
  std::string stage_;
};

} // namespace hdgmax
