#include "diffnoise/ou.hpp"

#include "diffnoise/normal.hpp"
#include <unsupported/Eigen/MatrixFunctions>

namespace diffnoise {

int ou_alpha_dim(int d) { return d * (d + 1) / 2; }
int ou_beta_dim(int d) { return d * d + d; }

OuCoefficients ou_coefficients(int d, const Vector& alpha, const Vector& beta) {
  if (alpha.size() != ou_alpha_dim(d) || beta.size() != ou_beta_dim(d)) {
    throw InvalidArgument("ou_coefficients: parameter sizes do not match dimension " +
                          std::to_string(d));
  }
  OuCoefficients c;
  c.drift_matrix = Eigen::Map<const Matrix>(beta.data(), d, d);
  c.intercept = beta.tail(d);
  c.diffusion = unvech(alpha);
  return c;
}

Vector ou_alpha(const Matrix& diffusion) { return vech(diffusion); }

Vector ou_beta(const Matrix& drift_matrix, const Vector& intercept) {
  const Eigen::Index d = drift_matrix.rows();
  if (drift_matrix.cols() != d || intercept.size() != d) {
    throw InvalidArgument("ou_beta: drift matrix must be d x d and intercept length d");
  }
  Vector beta(d * d + d);
  beta.head(d * d) = Eigen::Map<const Vector>(drift_matrix.data(), d * d);
  beta.tail(d) = intercept;
  return beta;
}

Box default_ou_alpha_box(int d) {
  Box box = Box::uniform(ou_alpha_dim(d), -1e3, 1e3);
  Eigen::Index pos = 0;
  for (int col = 0; col < d; ++col) {
    for (int row = col; row < d; ++row, ++pos) {
      if (row == col) box.lower[pos] = 1e-3;
    }
  }
  return box;
}

Box default_ou_beta_box(int d) { return Box::uniform(ou_beta_dim(d), -1e3, 1e3); }

ModelSpec make_ou_model(int d, Box alpha_box, Box beta_box) {
  if (d < 1) {
    throw InvalidArgument("make_ou_model: d must be positive");
  }
  ModelSpec m;
  m.d = d;
  m.r = d;
  m.m1 = ou_alpha_dim(d);
  m.m2 = ou_beta_dim(d);
  m.alpha_box = std::move(alpha_box);
  m.beta_box = std::move(beta_box);
  m.diffusion_depends_on_state = false;

  m.drift = [d](const Vector& x, const Vector& beta) -> Vector {
    return Eigen::Map<const Matrix>(beta.data(), d, d) * x + beta.tail(d);
  };
  m.diffusion = [](const Vector&, const Vector& alpha) -> Matrix { return unvech(alpha); };
  m.diffusion_sq_jacobian = [](const Vector&, const Vector& alpha) {
    const Matrix a = unvech(alpha);
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(alpha.size()));
    for (Eigen::Index k = 0; k < alpha.size(); ++k) {
      const Matrix unit = unvech(Vector::Unit(alpha.size(), k));
      out.emplace_back(unit * a + a * unit);
    }
    return out;
  };
  m.alpha_from_diffusion_sq = [](const Matrix& a_sq) -> Vector { return vech(psd_sqrt(a_sq)); };
  m.drift_design = [d](const Vector& x) {
    AffineDrift design;
    design.design = Matrix::Zero(d, d * d + d);
    for (int col = 0; col < d; ++col) {
      design.design.block(0, col * d, d, d) = x[col] * Matrix::Identity(d, d);
    }
    design.design.rightCols(d) = Matrix::Identity(d, d);
    design.offset = Vector::Zero(d);
    return design;
  };
  m.drift_jacobian = [design = m.drift_design](const Vector& x, const Vector&) {
    return design(x).design;
  };
  m.validate();
  return m;
}

LatentPath simulate_ou_exact(const OuCoefficients& ou, const Vector& x0, long n, double h,
                             StreamSeed seed) {
  const Eigen::Index d = ou.drift_matrix.rows();
  if (ou.drift_matrix.cols() != d || ou.intercept.size() != d || ou.diffusion.rows() != d ||
      x0.size() != d) {
    throw InvalidArgument("simulate_ou_exact: inconsistent dimensions");
  }
  if (n < 1 || !(h > 0.0)) {
    throw InvalidArgument("simulate_ou_exact: need n >= 1 and h > 0");
  }

  // exp([[B, c], [0, 0]] h) = [[e^{Bh}, ∫₀ʰ e^{Bs} ds · c], [0, 1]]
  Matrix mean_gen = Matrix::Zero(d + 1, d + 1);
  mean_gen.topLeftCorner(d, d) = ou.drift_matrix * h;
  mean_gen.topRightCorner(d, 1) = ou.intercept * h;
  const Matrix mean_exp = mean_gen.exp();
  const Matrix transition = mean_exp.topLeftCorner(d, d);
  const Vector shift = mean_exp.topRightCorner(d, 1);

  // Van Loan: exp([[-B, Q], [0, Bᵀ]] h) = [[·, F12], [0, F22]], Σ = F22ᵀ F12.
  const Matrix q = ou.diffusion * ou.diffusion.transpose();
  Matrix cov_gen = Matrix::Zero(2 * d, 2 * d);
  cov_gen.topLeftCorner(d, d) = -ou.drift_matrix * h;
  cov_gen.topRightCorner(d, d) = q * h;
  cov_gen.bottomRightCorner(d, d) = ou.drift_matrix.transpose() * h;
  const Matrix cov_exp = cov_gen.exp();
  Matrix cov = cov_exp.bottomRightCorner(d, d).transpose() * cov_exp.topRightCorner(d, d);
  cov = 0.5 * (cov + cov.transpose());
  const Matrix root = psd_sqrt(cov);

  Philox4x32 rng = seed.engine();
  LatentPath path;
  path.h = h;
  path.seed = seed;
  path.values.resize(n + 1, d);
  Vector x = x0;
  Vector z(d);
  path.values.row(0) = x.transpose();
  for (long i = 1; i <= n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) z[j] = standard_normal(rng);
    x = transition * x + shift + root * z;
    path.values.row(i) = x.transpose();
  }
  return path;
}

}  // namespace diffnoise
