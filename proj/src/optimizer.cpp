#include "diffnoise/optimizer.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace diffnoise {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxRestarts = 3;

// Minimization view over the free coordinates of a box problem.
class ReducedCost {
 public:
  ReducedCost(const BoxProblem& problem, const Vector& base) : problem_(problem), base_(base) {
    for (int i = 0; i < problem.box.size(); ++i) {
      if (!problem.box.is_fixed(i)) free_.push_back(i);
    }
    lower_.resize(dim());
    upper_.resize(dim());
    for (int j = 0; j < dim(); ++j) {
      lower_[j] = problem.box.lower[free_[j]];
      upper_[j] = problem.box.upper[free_[j]];
    }
  }

  int dim() const { return static_cast<int>(free_.size()); }
  int evaluations() const { return evaluations_; }

  Vector full(const Vector& z) const {
    Vector x = base_;
    for (int j = 0; j < dim(); ++j) x[free_[j]] = z[j];
    return x;
  }
  Vector reduce(const Vector& x) const {
    Vector z(dim());
    for (int j = 0; j < dim(); ++j) z[j] = x[free_[j]];
    return z;
  }
  Vector project(const Vector& z) const { return z.cwiseMax(lower_).cwiseMin(upper_); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }

  double operator()(const Vector& z) {
    ++evaluations_;
    double value;
    try {
      value = problem_.objective(full(z));
    } catch (const Error&) {
      return kInf;
    }
    return std::isfinite(value) ? -value : kInf;
  }

 private:
  const BoxProblem& problem_;
  Vector base_;
  std::vector<int> free_;
  Vector lower_;
  Vector upper_;
  int evaluations_ = 0;
};

struct RunResult {
  Vector point;
  double cost = kInf;
  int iterations = 0;
  bool converged = false;
};

double full_norm(const ReducedCost& cost, const Vector& z) { return cost.full(z).norm(); }

RunResult nelder_mead(ReducedCost& cost, const Vector& start, double start_cost,
                      const Vector& steps, int max_iters, double tol) {
  const int n = cost.dim();
  const double nd = static_cast<double>(n);
  // Dimension-adaptive coefficients (Gao & Han 2012).
  const double reflect = 1.0;
  const double expand = 1.0 + 2.0 / nd;
  const double contract = 0.75 - 1.0 / (2.0 * nd);
  const double shrink = 1.0 - 1.0 / nd;

  std::vector<Vector> vertex(static_cast<std::size_t>(n + 1));
  std::vector<double> value(static_cast<std::size_t>(n + 1));
  vertex[0] = start;
  value[0] = start_cost;
  for (int i = 0; i < n; ++i) {
    Vector v = start;
    double step = steps[i];
    if (v[i] + step > cost.upper()[i]) step = -step;
    v[i] = std::clamp(v[i] + step, cost.lower()[i], cost.upper()[i]);
    vertex[i + 1] = v;
    value[i + 1] = cost(v);
  }

  std::vector<int> order(static_cast<std::size_t>(n + 1));
  RunResult out;
  int iter = 0;
  for (;; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return value[a] < value[b]; });
    {
      std::vector<Vector> v2;
      std::vector<double> f2;
      for (int idx : order) {
        v2.push_back(vertex[idx]);
        f2.push_back(value[idx]);
      }
      vertex.swap(v2);
      value.swap(f2);
    }

    double diameter = 0.0;
    for (int i = 1; i <= n; ++i) diameter = std::max(diameter, (vertex[i] - vertex[0]).norm());
    if (diameter <= tol * (1.0 + full_norm(cost, vertex[0])) && std::isfinite(value[0])) {
      out.converged = true;
      break;
    }
    if (iter >= max_iters) break;

    Vector centroid = Vector::Zero(n);
    for (int i = 0; i < n; ++i) centroid += vertex[i];
    centroid /= nd;
    const Vector& worst = vertex[n];

    const Vector xr = cost.project(centroid + reflect * (centroid - worst));
    const double fr = cost(xr);
    if (fr < value[0]) {
      const Vector xe = cost.project(centroid + expand * (xr - centroid));
      const double fe = cost(xe);
      if (fe < fr) {
        vertex[n] = xe;
        value[n] = fe;
      } else {
        vertex[n] = xr;
        value[n] = fr;
      }
      continue;
    }
    if (fr < value[n - 1]) {
      vertex[n] = xr;
      value[n] = fr;
      continue;
    }
    bool accepted = false;
    if (fr < value[n]) {
      const Vector xc = cost.project(centroid + contract * (xr - centroid));
      const double fc = cost(xc);
      if (fc <= fr) {
        vertex[n] = xc;
        value[n] = fc;
        accepted = true;
      }
    } else {
      const Vector xc = cost.project(centroid + contract * (worst - centroid));
      const double fc = cost(xc);
      if (fc < value[n]) {
        vertex[n] = xc;
        value[n] = fc;
        accepted = true;
      }
    }
    if (!accepted) {
      for (int i = 1; i <= n; ++i) {
        vertex[i] = cost.project(vertex[0] + shrink * (vertex[i] - vertex[0]));
        value[i] = cost(vertex[i]);
      }
    }
  }
  out.point = vertex[0];
  out.cost = value[0];
  out.iterations = iter;
  return out;
}

// Central differences inside the box, one-sided at a bound.
Vector box_gradient(ReducedCost& cost, const Vector& z) {
  Vector g(z.size());
  Vector shifted = z;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double step = fd_step(z[i]);
    const double up = std::min(z[i] + step, cost.upper()[i]);
    const double down = std::max(z[i] - step, cost.lower()[i]);
    shifted[i] = up;
    const double fu = cost(shifted);
    shifted[i] = down;
    const double fd = cost(shifted);
    shifted[i] = z[i];
    g[i] = (fu - fd) / (up - down);
  }
  return g;
}

RunResult quasi_newton(ReducedCost& cost, const Vector& start, double start_cost,
                       int max_iters, double tol) {
  const Eigen::Index n = start.size();
  RunResult out;
  Vector x = start;
  double f = start_cost;
  Vector g = box_gradient(cost, x);
  Matrix inv_hessian = Matrix::Identity(n, n);
  int iter = 0;
  for (; iter < max_iters; ++iter) {
    Vector pg = g;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lo = x[i] <= cost.lower()[i] && g[i] > 0.0;
      const bool at_hi = x[i] >= cost.upper()[i] && g[i] < 0.0;
      if (at_lo || at_hi) pg[i] = 0.0;
    }
    if (!pg.allFinite()) break;
    if (pg.lpNorm<Eigen::Infinity>() <= tol * (1.0 + std::abs(f))) {
      out.converged = true;
      break;
    }
    Vector dir = -inv_hessian * pg;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (pg[i] == 0.0) dir[i] = 0.0;
    }
    if (dir.dot(pg) >= 0.0) {
      inv_hessian.setIdentity();
      dir = -pg;
    }
    double t = 1.0;
    Vector xn;
    double fn = kInf;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      xn = cost.project(x + t * dir);
      fn = cost(xn);
      if (fn <= f + 1e-4 * g.dot(xn - x)) {
        moved = true;
        break;
      }
    }
    if (!moved) {
      out.converged = true;
      break;
    }
    const Vector s = xn - x;
    const Vector gn = box_gradient(cost, xn);
    const Vector y = gn - g;
    const double sy = s.dot(y);
    x = xn;
    f = fn;
    g = gn;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Matrix eye = Matrix::Identity(n, n);
      inv_hessian = (eye - rho * s * y.transpose()) * inv_hessian *
                        (eye - rho * y * s.transpose()) +
                    rho * s * s.transpose();
    }
    if (s.lpNorm<Eigen::Infinity>() <= tol * (1.0 + full_norm(cost, x))) {
      out.converged = true;
      ++iter;
      break;
    }
  }
  out.point = x;
  out.cost = f;
  out.iterations = iter;
  return out;
}

}  // namespace

bool OptimizerReport::hit_boundary() const {
  return std::any_of(at_lower.begin(), at_lower.end(), [](bool b) { return b; }) ||
         std::any_of(at_upper.begin(), at_upper.end(), [](bool b) { return b; });
}

std::vector<Vector> default_starts(const Box& box, int random_count) {
  std::vector<Vector> starts{box.center()};
  Philox4x32 rng(label_key("diffnoise.optimizer.starts"), 0);
  for (int s = 0; s < random_count; ++s) {
    Vector x(box.size());
    for (int i = 0; i < box.size(); ++i) {
      // Interior: keep clear of the bounds by 1% of the width.
      const double u = 0.01 + 0.98 * rng.uniform();
      x[i] = box.lower[i] + u * (box.upper[i] - box.lower[i]);
    }
    starts.push_back(std::move(x));
  }
  return starts;
}

Vector numeric_gradient(const Objective& f, const Vector& x) {
  Vector g(x.size());
  Vector shifted = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = fd_step(x[i]);
    shifted[i] = x[i] + step;
    const double up = f(shifted);
    shifted[i] = x[i] - step;
    const double down = f(shifted);
    shifted[i] = x[i];
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

OptimizationResult maximize(const BoxProblem& problem) {
  if (!problem.objective) {
    throw InvalidArgument("maximize: objective is empty");
  }
  if (problem.starts.empty()) {
    throw InvalidArgument("maximize: no start points");
  }
  const int dim = problem.box.size();

  OptimizationResult result;
  result.value = -kInf;
  bool have_best = false;
  int evaluations = 0;

  for (const Vector& start : problem.starts) {
    if (start.size() != dim || !problem.box.contains(start)) {
      throw InvalidArgument("maximize: start point outside the box");
    }
    ReducedCost cost(problem, start);
    const double start_cost = cost(cost.reduce(start));
    if (!std::isfinite(start_cost)) {
      throw InvalidArgument("maximize: objective is not finite at a start point");
    }
    StartReport rep;
    rep.start = start;
    rep.start_value = -start_cost;

    const int free = cost.dim();
    if (free == 0) {
      rep.point = start;
      rep.value = -start_cost;
      rep.converged = true;
    } else {
      const int max_iters = problem.max_iters > 0 ? problem.max_iters : 500 * free;
      const Vector widths = cost.upper() - cost.lower();
      Vector steps = 0.05 * widths;
      RunResult run;
      if (problem.method == OptimizerMethod::quasi_newton) {
        run = quasi_newton(cost, cost.reduce(start), start_cost, max_iters, problem.tol);
      } else {
        run = nelder_mead(cost, cost.reduce(start), start_cost, steps, max_iters, problem.tol);
        // Re-seed a smaller simplex at the best point; a collapsed simplex on a
        // face of the box can otherwise stall short of the optimum.
        for (int restart = 0; restart < kMaxRestarts; ++restart) {
          steps *= 0.1;
          RunResult again =
              nelder_mead(cost, run.point, run.cost, steps, max_iters, problem.tol);
          again.iterations += run.iterations;
          ++rep.restarts;
          const bool improved = again.cost < run.cost - 1e-12 * (1.0 + std::abs(run.cost));
          run = again;
          if (!improved) break;
        }
      }
      rep.point = cost.full(run.point);
      rep.value = -run.cost;
      rep.iterations = run.iterations;
      rep.converged = run.converged;
    }
    evaluations += cost.evaluations();
    if (!have_best || rep.value > result.value) {
      result.argmax = rep.point;
      result.value = rep.value;
      result.report.iterations = rep.iterations;
      result.report.converged = rep.converged;
      have_best = true;
    }
    result.report.starts.push_back(std::move(rep));
  }

  result.report.evaluations = evaluations;
  result.report.at_lower.assign(static_cast<std::size_t>(dim), false);
  result.report.at_upper.assign(static_cast<std::size_t>(dim), false);
  for (int i = 0; i < dim; ++i) {
    if (problem.box.is_fixed(i)) continue;
    result.report.at_lower[i] = result.argmax[i] - problem.box.lower[i] <= kBoundaryFlagTolerance;
    result.report.at_upper[i] = problem.box.upper[i] - result.argmax[i] <= kBoundaryFlagTolerance;
  }
  return result;
}

}  // namespace diffnoise
