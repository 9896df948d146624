#pragma once

#include "diffnoise/simulate.hpp"

namespace diffnoise {

/// Coefficients of dX = (B X + c) dt + a dw.
struct OuCoefficients {
  Matrix drift_matrix;  // B, d × d
  Vector intercept;     // c, d
  Matrix diffusion;     // a, d × r
};

/// Built-in multivariate Ornstein–Uhlenbeck family with symmetric diffusion:
///   α = vech(a)            (m1 = d(d+1)/2)
///   β = (vec(B), c)        (m2 = d² + d, vec column-major)
/// For d = 2 this is exactly a = [[α1, α2], [α2, α3]], B = [[β1, β3], [β2, β4]],
/// c = (β5, β6). Analytic ∂A/∂α, ∂b/∂β and the affine drift design are attached.
ModelSpec make_ou_model(int d, Box alpha_box, Box beta_box);

/// Boxes used when a config does not give any: diagonal of a in [1e-3, 1e3],
/// off-diagonal in [-1e3, 1e3], every drift coordinate in [-1e3, 1e3].
Box default_ou_alpha_box(int d);
Box default_ou_beta_box(int d);

int ou_alpha_dim(int d);
int ou_beta_dim(int d);

OuCoefficients ou_coefficients(int d, const Vector& alpha, const Vector& beta);
Vector ou_alpha(const Matrix& diffusion);
Vector ou_beta(const Matrix& drift_matrix, const Vector& intercept);

/// Exact Gaussian transition sampler (Van Loan block exponentials); no
/// discretization bias. Requires a positive definite one-step covariance.
LatentPath simulate_ou_exact(const OuCoefficients& ou, const Vector& x0, long n, double h,
                             StreamSeed seed);

}  // namespace diffnoise
