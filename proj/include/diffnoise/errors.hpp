#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace diffnoise {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs that violate a documented precondition (dimensions, ranges, boxes).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Data for which a statistic is undefined (constant series, too few blocks).
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

/// A covariance-type matrix that must be positive definite was not.
class SingularMatrixError : public Error {
 public:
  SingularMatrixError(const std::string& what, long block, double determinant)
      : Error(what), block_(block), determinant_(determinant) {}

  long block() const noexcept { return block_; }
  double determinant() const noexcept { return determinant_; }

 private:
  long block_;
  double determinant_;
};

/// The optimizer ran out of iterations; carries the best point seen.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, Eigen::VectorXd best, double best_value)
      : Error(what), best_(std::move(best)), best_value_(best_value) {}

  const Eigen::VectorXd& best_point() const noexcept { return best_; }
  double best_value() const noexcept { return best_value_; }

 private:
  Eigen::VectorXd best_;
  double best_value_;
};

}  // namespace diffnoise
