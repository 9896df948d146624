#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "diffnoise/errors.hpp"
#include "diffnoise/rng.hpp"

namespace diffnoise {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Axis-aligned compact parameter set. A coordinate with lower == upper is
/// held fixed by the optimizer.
struct Box {
  Vector lower;
  Vector upper;

  Box() = default;
  Box(Vector lo, Vector hi);

  /// Box of `dim` identical intervals.
  static Box uniform(int dim, double lo, double hi);

  int size() const { return static_cast<int>(lower.size()); }
  bool contains(const Vector& x) const;
  Vector project(const Vector& x) const;
  Vector center() const { return 0.5 * (lower + upper); }
  Vector width() const { return upper - lower; }
  bool is_fixed(int i) const { return lower[i] == upper[i]; }
};

/// b(x, β) = design(x)·β + offset(x).
struct AffineDrift {
  Matrix design;  // d × m2
  Vector offset;  // d
};

/// Drift b(x,β) and diffusion a(x,α) of the latent SDE dX = b dt + a dw,
/// together with the compact parameter boxes Θ₁ (α) and Θ₂ (β).
///
/// Only `drift` and `diffusion` are required. The optional callables unlock
/// analytic derivatives and closed-form shortcuts; when absent, derivatives
/// fall back to central differences with step 1e-6·(1 + |θ_k|).
struct ModelSpec {
  using DriftFn = std::function<Vector(const Vector& x, const Vector& beta)>;
  using DiffusionFn = std::function<Matrix(const Vector& x, const Vector& alpha)>;
  using DiffusionSqJacobianFn =
      std::function<std::vector<Matrix>(const Vector& x, const Vector& alpha)>;
  using DriftJacobianFn = std::function<Matrix(const Vector& x, const Vector& beta)>;
  using DriftDesignFn = std::function<AffineDrift(const Vector& x)>;
  using DiffusionRootFn = std::function<Vector(const Matrix& a_sq)>;

  int d = 1;
  int r = 1;
  int m1 = 0;
  int m2 = 0;
  DriftFn drift;
  DiffusionFn diffusion;
  Box alpha_box;
  Box beta_box;

  /// ∂A/∂α_k for k = 0..m1-1, with A = a·aᵀ.
  DiffusionSqJacobianFn diffusion_sq_jacobian;
  /// ∂b/∂β as a d × m2 matrix.
  DriftJacobianFn drift_jacobian;
  /// Present iff the drift is affine in β.
  DriftDesignFn drift_design;
  /// α whose A(·, α) is close to a given symmetric PSD matrix. Used to seed
  /// the α search from a moment estimate of A.
  DiffusionRootFn alpha_from_diffusion_sq;
  /// False when a(x, α) does not depend on x; enables per-evaluation caching.
  bool diffusion_depends_on_state = true;

  /// Throws InvalidArgument if dimensions, boxes or callables are inconsistent.
  void validate() const;

  /// A(x, α) = a(x, α) a(x, α)ᵀ.
  Matrix diffusion_sq(const Vector& x, const Vector& alpha) const;
  /// ∂A/∂α_k, analytic if available, otherwise central differences.
  std::vector<Matrix> diffusion_sq_derivatives(const Vector& x, const Vector& alpha) const;
  /// ∂b/∂β (d × m2), analytic if available, otherwise central differences.
  Matrix drift_derivative(const Vector& x, const Vector& beta) const;
};

/// Block structure (n, h, τ, p, k, Δ) with h ≈ p^(−τ).
struct SamplingScheme {
  long n = 0;
  double h = 0.0;
  double tau = 2.0;
  long p = 0;
  long k = 0;
  double delta = 0.0;

  /// Observations past index k·p that no block uses.
  long unused() const { return n - k * p; }
  /// kₙΔₙ², reported alongside every estimate.
  double k_delta_sq() const { return static_cast<double>(k) * delta * delta; }
  /// 3Δ^((2−τ)/(τ−1)): multiplier of Λ inside the H₁ covariance. Exactly 3 at τ = 2.
  double noise_multiplier() const;
};

/// p = floor(h^(−1/τ)), k = floor(n/p), Δ = p·h.
SamplingScheme derive_scheme(long n, double h, double tau);

/// Law of each (standardized, symmetric) noise component.
enum class NoiseLaw { gaussian, uniform, laplace };

std::string to_string(NoiseLaw law);
NoiseLaw noise_law_from_string(const std::string& name);
/// E|ε|⁴ for a unit-variance draw of `law`.
double fourth_moment(NoiseLaw law);

/// Additive observation noise Λ^{1/2}ε with componentwise-independent ε.
struct NoiseSpec {
  Matrix lambda;
  NoiseLaw law = NoiseLaw::gaussian;
  /// Overrides `law` when set; must draw mean-0, unit-variance, symmetric values.
  std::function<double(Philox4x32&)> custom_sampler;
  /// E|ε⁽ᵏ⁾|⁴ per component.
  Vector fourth_moments;

  NoiseSpec() = default;
  explicit NoiseSpec(Matrix lambda, NoiseLaw law = NoiseLaw::gaussian);

  int dim() const { return static_cast<int>(lambda.rows()); }
  void validate() const;
  Vector draw(Philox4x32& rng) const;
};

/// Equally spaced observations Y₀, Y_h, …, Y_{nh} stored one row per time.
struct ObservationSeries {
  double h = 0.0;
  Matrix values;  // (n+1) × d

  ObservationSeries() = default;
  ObservationSeries(double step, Matrix rows);

  long n() const { return static_cast<long>(values.rows()) - 1; }
  int dim() const { return static_cast<int>(values.cols()); }
  void validate() const;
};

/// Half-vectorization: lower triangle stacked column by column,
/// (1,1),(2,1),…,(d,1),(2,2),…,(d,d).
template <typename Derived>
Vector vech(const Eigen::MatrixBase<Derived>& m, double tol = 1e-10) {
  if (m.rows() != m.cols()) {
    throw InvalidArgument("vech: matrix is not square");
  }
  const Eigen::Index d = m.rows();
  Vector out(d * (d + 1) / 2);
  Eigen::Index pos = 0;
  for (Eigen::Index col = 0; col < d; ++col) {
    for (Eigen::Index row = col; row < d; ++row) {
      if (std::abs(m(row, col) - m(col, row)) > tol) {
        throw InvalidArgument("vech: matrix is not symmetric at (" + std::to_string(row + 1) +
                              "," + std::to_string(col + 1) + ")");
      }
      out[pos++] = m(row, col);
    }
  }
  return out;
}

/// Inverse of vech: rebuilds the symmetric matrix.
Matrix unvech(const Vector& v);

/// Dimension d with d(d+1)/2 == size, or -1.
int vech_dimension(Eigen::Index size);

/// Symmetric square root of a symmetric PSD matrix via eigendecomposition.
/// Eigenvalues in [−1e-12, 0) are clamped to zero; anything lower throws.
template <typename Derived>
Matrix psd_sqrt(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() != m.cols()) {
    throw InvalidArgument("psd_sqrt: matrix is not square");
  }
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  Vector values = eig.eigenvalues();
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] < -1e-12) {
      throw InvalidArgument("psd_sqrt: eigenvalue " + std::to_string(values[i]) +
                            " is negative");
    }
    values[i] = values[i] > 0.0 ? std::sqrt(values[i]) : 0.0;
  }
  const Matrix& q = eig.eigenvectors();
  Matrix root = q * values.asDiagonal() * q.transpose();
  return 0.5 * (root + root.transpose());
}

/// Central-difference step used throughout: 1e-6·(1 + |x|).
inline double fd_step(double x) { return 1e-6 * (1.0 + std::abs(x)); }

}  // namespace diffnoise
