#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace metairl {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class InvalidMdp : public Error {
 public:
  using Error::Error;
};

class InvalidRange : public Error {
 public:
  using Error::Error;
};

class OutOfBounds : public Error {
 public:
  using Error::Error;
};

class TooManyTasks : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyDemos : public Error {
 public:
  using Error::Error;
};

class EmptyDomain : public Error {
 public:
  using Error::Error;
};

class ZeroVariance : public Error {
 public:
  using Error::Error;
};

/// Malformed input file (world JSON, demo CSV, checkpoint).
class FormatError : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  NonConvergence(double residual, std::size_t iterations)
      : Error("value iteration did not converge after " + std::to_string(iterations) +
              " iterations (residual " + std::to_string(residual) + ")"),
        residual_(residual),
        iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  std::size_t iterations_;
};

class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(std::size_t iteration)
      : Error("objective became non-finite at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

class GradientCheckFailed : public Error {
 public:
  GradientCheckFailed(std::size_t iteration, double rel_error)
      : Error("gradient check failed at iteration " + std::to_string(iteration) +
              " (relative error " + std::to_string(rel_error) + ")"),
        iteration_(iteration),
        rel_error_(rel_error) {}

  std::size_t iteration() const noexcept { return iteration_; }
  double rel_error() const noexcept { return rel_error_; }

 private:
  std::size_t iteration_;
  double rel_error_;
};

}  // namespace metairl
