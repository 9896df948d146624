#pragma once

#include <functional>
#include <vector>

#include "diffnoise/core.hpp"

namespace diffnoise {

using Objective = std::function<double(const Vector&)>;

enum class OptimizerMethod { nelder_mead, quasi_newton };

/// Box-constrained maximization problem. Coordinates with lower == upper are
/// held fixed.
struct BoxProblem {
  Objective objective;  // maximized; non-finite values and thrown Errors count as −∞
  Box box;
  std::vector<Vector> starts;
  /// Iteration cap per start; 0 means 500 × (number of free coordinates).
  int max_iters = 0;
  /// Stop when the simplex diameter drops below tol·(1 + ‖x_best‖).
  double tol = 1e-8;
  OptimizerMethod method = OptimizerMethod::nelder_mead;
};

struct StartReport {
  Vector start;
  Vector point;
  double start_value = 0.0;
  double value = 0.0;
  int iterations = 0;
  int restarts = 0;
  bool converged = false;
};

struct OptimizerReport {
  int iterations = 0;   // of the winning start
  int evaluations = 0;  // over all starts
  bool converged = false;
  std::vector<bool> at_lower;  // winning point within 1e-6 of the bound
  std::vector<bool> at_upper;
  std::vector<StartReport> starts;

  bool hit_boundary() const;
};

struct OptimizationResult {
  Vector argmax;
  double value = 0.0;
  OptimizerReport report;
};

/// Best point over all starts. Throws InvalidArgument if a start lies outside
/// the box or the objective is not finite there.
OptimizationResult maximize(const BoxProblem& problem);

/// Box center followed by `random_count` uniform interior points drawn from a
/// fixed-label Philox stream, so the list depends only on the box.
std::vector<Vector> default_starts(const Box& box, int random_count = 4);

/// Central-difference gradient with step 1e-6·(1 + |x_i|); this is the
/// gradient the quasi-Newton method uses.
Vector numeric_gradient(const Objective& f, const Vector& x);

/// Distance under which a coordinate is reported as sitting on its bound.
inline constexpr double kBoundaryFlagTolerance = 1e-6;

}  // namespace diffnoise
