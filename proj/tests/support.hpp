#pragma once

// Shared fixtures: the two-dimensional OU model used throughout the tests and
// small brute-force reference implementations.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "diffnoise/estimators.hpp"
#include "diffnoise/local_means.hpp"
#include "diffnoise/noise_test.hpp"
#include "diffnoise/ou.hpp"

namespace testing {

using diffnoise::Box;
using diffnoise::Matrix;
using diffnoise::Vector;

/// a = [[α1, α2], [α2, α3]], B = [[β1, β3], [β2, β4]], c = (β5, β6).
inline Vector ou_alpha_true() { return (Vector(3) << 1.0, 0.1, 1.0).finished(); }
inline Vector ou_beta_true() {
  return (Vector(6) << -1.0, -0.1, -0.1, -1.0, 1.0, 1.0).finished();
}
inline Vector ou_x0() { return Vector::Constant(2, 1.0); }

/// The off-diagonal range excludes the second square root of A
/// (a = [[0.1, 1], [1, 0.1]] has the same a·aᵀ), which is otherwise an equally
/// good maximizer.
inline Box ou_alpha_box() {
  return Box((Vector(3) << 0.01, -0.5, 0.01).finished(),
             (Vector(3) << 300.0, 0.5, 300.0).finished());
}
inline Box ou_beta_box() { return Box::uniform(6, -50.0, 50.0); }

inline diffnoise::ModelSpec ou_model() {
  return diffnoise::make_ou_model(2, ou_alpha_box(), ou_beta_box());
}

inline diffnoise::OuCoefficients ou_truth() {
  return diffnoise::ou_coefficients(2, ou_alpha_true(), ou_beta_true());
}

/// Noisy observations of the OU model on h = n^(−0.7) with exact transitions.
inline diffnoise::ObservationSeries ou_observations(long n, double lambda_scale,
                                                    std::uint64_t seed, std::uint64_t stream = 0) {
  const double h = std::pow(static_cast<double>(n), -0.7);
  const auto path = diffnoise::simulate_ou_exact(ou_truth(), ou_x0(), n, h,
                                                 diffnoise::StreamSeed(seed, stream));
  const diffnoise::NoiseSpec noise(lambda_scale * Matrix::Identity(2, 2));
  return diffnoise::contaminate(path, noise,
                                diffnoise::StreamSeed(diffnoise::mix_seed(seed, 99), stream));
}

/// Literal double loop over increments, no symmetrization tricks.
inline Matrix brute_force_lambda(const Matrix& y) {
  const long n = static_cast<long>(y.rows()) - 1;
  Matrix out = Matrix::Zero(y.cols(), y.cols());
  for (long i = 0; i < n; ++i) {
    for (Eigen::Index a = 0; a < y.cols(); ++a) {
      for (Eigen::Index b = 0; b < y.cols(); ++b) {
        out(a, b) += (y(i + 1, a) - y(i, a)) * (y(i + 1, b) - y(i, b));
      }
    }
  }
  return out / (2.0 * static_cast<double>(n));
}

/// Zₙ with every sum written out from its definition.
inline double brute_force_z(const Matrix& y, long p, long k) {
  const long n = static_cast<long>(y.rows()) - 1;
  std::vector<double> s(static_cast<std::size_t>(n + 1), 0.0);
  for (long i = 0; i <= n; ++i) {
    for (Eigen::Index l = 0; l < y.cols(); ++l) s[i] += y(i, l);
  }
  double full = 0.0;
  for (long i = 0; i < n; ++i) full += (s[i + 1] - s[i]) * (s[i + 1] - s[i]);
  double halved = 0.0;
  for (long i = 0; 2 * i <= n - 2; ++i) {
    halved += (s[2 * i + 2] - s[2 * i]) * (s[2 * i + 2] - s[2 * i]);
  }
  std::vector<double> means(static_cast<std::size_t>(k), 0.0);
  for (long j = 0; j < k; ++j) {
    for (long i = 0; i < p; ++i) means[j] += s[j * p + i];
    means[j] /= static_cast<double>(p);
  }
  double fourth = 0.0;
  for (long j = 1; j <= k - 2; ++j) fourth += std::pow(means[j + 1] - means[j], 4);
  return std::sqrt(2.0 * static_cast<double>(p) / (3.0 * fourth)) * (full - halved);
}

/// One-dimensional model dX = (β₀ + β₁X) dt + α dW with α in `alpha_box`.
inline diffnoise::ModelSpec scalar_linear_model(Box alpha_box, Box beta_box) {
  diffnoise::ModelSpec m;
  m.d = 1;
  m.r = 1;
  m.m1 = 1;
  m.m2 = beta_box.size();
  m.alpha_box = std::move(alpha_box);
  m.beta_box = std::move(beta_box);
  const int m2 = m.m2;
  m.drift = [m2](const Vector& x, const Vector& beta) {
    Vector out(1);
    out[0] = m2 == 1 ? beta[0] * x[0] : beta[0] + beta[1] * x[0];
    return out;
  };
  m.diffusion = [](const Vector&, const Vector& alpha) {
    Matrix out(1, 1);
    out(0, 0) = alpha[0];
    return out;
  };
  m.drift_design = [m2](const Vector& x) {
    diffnoise::AffineDrift aff{Matrix::Zero(1, m2), Vector::Zero(1)};
    if (m2 == 1) {
      aff.design(0, 0) = x[0];
    } else {
      aff.design(0, 0) = 1.0;
      aff.design(0, 1) = x[0];
    }
    return aff;
  };
  m.diffusion_depends_on_state = false;
  return m;
}

/// Five-point central difference with its own step, independent of the
/// library's numeric gradient.
inline Vector five_point_gradient(const std::function<double(const Vector&)>& f, const Vector& x) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double e = 1e-4 * (1.0 + std::abs(x[i]));
    Vector p1 = x, p2 = x, m1 = x, m2 = x;
    p1[i] += e;
    p2[i] += 2 * e;
    m1[i] -= e;
    m2[i] -= 2 * e;
    g[i] = (-f(p2) + 8 * f(p1) - 8 * f(m1) + f(m2)) / (12 * e);
  }
  return g;
}

inline double relative_gap(const Vector& a, const Vector& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

/// Block-by-block GLS for the OU drift b(x) = Bx + c written without the
/// model's design callable: row l of the residual for block j is
/// ΔȲ_j[l] − Δ(Σ_m B[l,m] Ȳ_{j−1}[m] + c[l]).
inline Vector ou_gls_oracle(const diffnoise::LocalMeanSeries& lm, const Matrix& a_sq) {
  const double delta = lm.scheme.delta;
  const Matrix w = (delta * a_sq).inverse();
  Matrix normal = Matrix::Zero(6, 6);
  Vector rhs = Vector::Zero(6);
  for (long j = 1; j <= lm.k() - 2; ++j) {
    const Vector x = lm.means.row(j - 1).transpose();
    const Vector dy = (lm.means.row(j + 1) - lm.means.row(j)).transpose();
    // β = (B11, B21, B12, B22, c1, c2)
    Matrix f = Matrix::Zero(2, 6);
    f(0, 0) = x[0];
    f(1, 1) = x[0];
    f(0, 2) = x[1];
    f(1, 3) = x[1];
    f(0, 4) = 1.0;
    f(1, 5) = 1.0;
    f *= delta;
    normal += f.transpose() * w * f;
    rhs += f.transpose() * w * dy;
  }
  return normal.ldlt().solve(rhs);
}

/// H₁ for a(x, α) = α in one dimension is maximized at
/// α² = (3/(2Δ(k−2))) Σ (ΔȲ)² − 3Δ^((2−τ)/(τ−1)) Λ̂, clipped to [lo, hi].
inline double scalar_alpha_oracle(const diffnoise::LocalMeanSeries& lm, double lambda_hat,
                                  double lo, double hi) {
  const double delta = lm.scheme.delta;
  const double tau = lm.scheme.tau;
  double sum = 0.0;
  for (long j = 1; j <= lm.k() - 2; ++j) {
    sum += std::pow(lm.means(j + 1, 0) - lm.means(j, 0), 2);
  }
  const double a2 = 3.0 / (2.0 * delta * static_cast<double>(lm.k() - 2)) * sum -
                    3.0 * std::pow(delta, (2.0 - tau) / (tau - 1.0)) * lambda_hat;
  return std::clamp(std::sqrt(std::max(a2, 0.0)), lo, hi);
}

/// Median of a copy.
inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double sample_sd(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace testing
