#include "diffnoise/core.hpp"

#include "diffnoise/normal.hpp"

namespace diffnoise {

Box::Box(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size()) {
    throw InvalidArgument("Box: lower and upper have different sizes");
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i])) {
      throw InvalidArgument("Box: bounds must be finite (coordinate " + std::to_string(i) + ")");
    }
    if (lower[i] > upper[i]) {
      throw InvalidArgument("Box: lower > upper at coordinate " + std::to_string(i));
    }
  }
}

Box Box::uniform(int dim, double lo, double hi) {
  return Box(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
}

bool Box::contains(const Vector& x) const {
  if (x.size() != lower.size()) {
    return false;
  }
  return ((x.array() >= lower.array()) && (x.array() <= upper.array())).all();
}

Vector Box::project(const Vector& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

void ModelSpec::validate() const {
  if (d < 1 || r < 1) {
    throw InvalidArgument("ModelSpec: d and r must be positive");
  }
  if (m1 < 0 || m2 < 0) {
    throw InvalidArgument("ModelSpec: parameter dimensions must be non-negative");
  }
  if (!drift || !diffusion) {
    throw InvalidArgument("ModelSpec: drift and diffusion callables are required");
  }
  if (alpha_box.size() != m1) {
    throw InvalidArgument("ModelSpec: alpha box has " + std::to_string(alpha_box.size()) +
                          " coordinates, expected " + std::to_string(m1));
  }
  if (beta_box.size() != m2) {
    throw InvalidArgument("ModelSpec: beta box has " + std::to_string(beta_box.size()) +
                          " coordinates, expected " + std::to_string(m2));
  }
}

Matrix ModelSpec::diffusion_sq(const Vector& x, const Vector& alpha) const {
  const Matrix a = diffusion(x, alpha);
  if (a.rows() != d || a.cols() != r) {
    throw InvalidArgument("ModelSpec: diffusion returned a " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " matrix, expected " + std::to_string(d) +
                          "x" + std::to_string(r));
  }
  return a * a.transpose();
}

std::vector<Matrix> ModelSpec::diffusion_sq_derivatives(const Vector& x,
                                                        const Vector& alpha) const {
  if (diffusion_sq_jacobian) {
    return diffusion_sq_jacobian(x, alpha);
  }
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(m1));
  Vector shifted = alpha;
  for (int k = 0; k < m1; ++k) {
    const double step = fd_step(alpha[k]);
    shifted[k] = alpha[k] + step;
    const Matrix up = diffusion_sq(x, shifted);
    shifted[k] = alpha[k] - step;
    const Matrix down = diffusion_sq(x, shifted);
    shifted[k] = alpha[k];
    out.emplace_back((up - down) / (2.0 * step));
  }
  return out;
}

Matrix ModelSpec::drift_derivative(const Vector& x, const Vector& beta) const {
  if (drift_jacobian) {
    return drift_jacobian(x, beta);
  }
  if (drift_design) {
    return drift_design(x).design;
  }
  Matrix jac(d, m2);
  Vector shifted = beta;
  for (int k = 0; k < m2; ++k) {
    const double step = fd_step(beta[k]);
    shifted[k] = beta[k] + step;
    const Vector up = drift(x, shifted);
    shifted[k] = beta[k] - step;
    const Vector down = drift(x, shifted);
    shifted[k] = beta[k];
    jac.col(k) = (up - down) / (2.0 * step);
  }
  return jac;
}

double SamplingScheme::noise_multiplier() const {
  const double exponent = (2.0 - tau) / (tau - 1.0);
  if (exponent == 0.0) {
    return 3.0;
  }
  return 3.0 * std::exp(exponent * std::log(delta));
}

SamplingScheme derive_scheme(long n, double h, double tau) {
  if (!(tau > 1.0 && tau <= 2.0)) {
    throw InvalidArgument("derive_scheme: tau must lie in (1, 2], got " + std::to_string(tau));
  }
  if (n < 4) {
    throw InvalidArgument("derive_scheme: need n >= 4 increments");
  }
  if (!(h > 0.0 && h < 1.0)) {
    throw InvalidArgument("derive_scheme: h must lie in (0, 1)");
  }
  // h^(-1/τ) sitting on an integer up to rounding (h = 0.01, τ = 2) counts as that integer.
  const double raw = std::exp(-std::log(h) / tau);
  const double nearest = std::round(raw);
  const double block = std::abs(raw - nearest) <= 1e-9 * raw ? nearest : std::floor(raw);

  SamplingScheme s;
  s.n = n;
  s.h = h;
  s.tau = tau;
  s.p = std::max(1L, static_cast<long>(block));
  s.k = n / s.p;
  s.delta = static_cast<double>(s.p) * h;
  if (s.k < 3) {
    throw InvalidArgument("derive_scheme: only " + std::to_string(s.k) +
                          " blocks of length " + std::to_string(s.p) + "; need at least 3");
  }
  return s;
}

std::string to_string(NoiseLaw law) {
  switch (law) {
    case NoiseLaw::gaussian:
      return "gaussian";
    case NoiseLaw::uniform:
      return "uniform";
    case NoiseLaw::laplace:
      return "laplace";
  }
  return "gaussian";
}

NoiseLaw noise_law_from_string(const std::string& name) {
  if (name == "gaussian" || name == "normal") return NoiseLaw::gaussian;
  if (name == "uniform") return NoiseLaw::uniform;
  if (name == "laplace") return NoiseLaw::laplace;
  throw InvalidArgument("unknown noise law '" + name + "'");
}

double fourth_moment(NoiseLaw law) {
  switch (law) {
    case NoiseLaw::gaussian:
      return 3.0;
    case NoiseLaw::uniform:
      return 9.0 / 5.0;
    case NoiseLaw::laplace:
      return 6.0;
  }
  return 3.0;
}

NoiseSpec::NoiseSpec(Matrix lam, NoiseLaw l)
    : lambda(std::move(lam)),
      law(l),
      fourth_moments(Vector::Constant(lambda.rows(), fourth_moment(l))) {}

void NoiseSpec::validate() const {
  if (lambda.rows() != lambda.cols() || lambda.rows() == 0) {
    throw InvalidArgument("NoiseSpec: lambda must be a non-empty square matrix");
  }
  if ((lambda - lambda.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw InvalidArgument("NoiseSpec: lambda is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(lambda, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12) {
    throw InvalidArgument("NoiseSpec: lambda has a negative eigenvalue");
  }
  if (fourth_moments.size() != lambda.rows()) {
    throw InvalidArgument("NoiseSpec: need one fourth moment per component");
  }
  if ((fourth_moments.array() < 1.0).any()) {
    throw InvalidArgument("NoiseSpec: fourth moments of unit-variance noise must be >= 1");
  }
}

Vector NoiseSpec::draw(Philox4x32& rng) const {
  Vector eps(dim());
  if (custom_sampler) {
    for (int i = 0; i < eps.size(); ++i) eps[i] = custom_sampler(rng);
    return eps;
  }
  switch (law) {
    case NoiseLaw::gaussian: {
      for (int i = 0; i < eps.size(); ++i) eps[i] = standard_normal(rng);
      break;
    }
    case NoiseLaw::uniform: {
      const double half_width = std::sqrt(3.0);
      for (int i = 0; i < eps.size(); ++i) eps[i] = half_width * (2.0 * rng.uniform() - 1.0);
      break;
    }
    case NoiseLaw::laplace: {
      const double scale = 1.0 / std::sqrt(2.0);
      for (int i = 0; i < eps.size(); ++i) {
        const double sign = (rng() >> 63) ? 1.0 : -1.0;
        const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
        eps[i] = -sign * scale * std::log(u);
      }
      break;
    }
  }
  return eps;
}

ObservationSeries::ObservationSeries(double step, Matrix rows) : h(step), values(std::move(rows)) {
  validate();
}

void ObservationSeries::validate() const {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw InvalidArgument("ObservationSeries: step h must be positive and finite");
  }
  if (values.rows() < 2 || values.cols() < 1) {
    throw InvalidArgument("ObservationSeries: need at least two rows and one column");
  }
  if (!values.allFinite()) {
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      if (!values.row(i).allFinite()) {
        throw InvalidArgument("ObservationSeries: non-finite value in row " + std::to_string(i));
      }
    }
  }
}

int vech_dimension(Eigen::Index size) {
  for (int d = 0; d * (d + 1) / 2 <= size; ++d) {
    if (d * (d + 1) / 2 == size) return d;
  }
  return -1;
}

Matrix unvech(const Vector& v) {
  const int d = vech_dimension(v.size());
  if (d < 0) {
    throw InvalidArgument("unvech: length " + std::to_string(v.size()) +
                          " is not a triangular number");
  }
  Matrix m(d, d);
  Eigen::Index pos = 0;
  for (int col = 0; col < d; ++col) {
    for (int row = col; row < d; ++row) {
      m(row, col) = v[pos];
      m(col, row) = v[pos];
      ++pos;
    }
  }
  return m;
}

}  // namespace diffnoise
