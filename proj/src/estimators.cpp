#include "diffnoise/estimators.hpp"

#include <cmath>
#include <limits>

#include "diffnoise/detail/summation.hpp"

namespace diffnoise {

using detail::CompensatedSum;

namespace {

// Cholesky of a covariance that must be positive definite; `what` names the
// caller, `block` the offending block (1-based in the quasi-likelihood sums).
Eigen::LLT<Matrix> checked_llt(const Matrix& m, const char* what, long block) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success || !m.allFinite()) {
    const double det = m.allFinite() ? m.determinant() : std::numeric_limits<double>::quiet_NaN();
    throw SingularMatrixError(std::string(what) + ": covariance is not positive definite at block " +
                                  std::to_string(block) + " (determinant " +
                                  std::to_string(det) + ")",
                              block, det);
  }
  return llt;
}

double log_det(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Matrix block_increments(const LocalMeanSeries& lm) {
  const long k = lm.k();
  if (k < 3) {
    throw DegenerateDataError("quasi-likelihood needs at least 3 local means, got " +
                              std::to_string(k));
  }
  return lm.means.bottomRows(k - 2) - lm.means.middleRows(1, k - 2);
}

std::vector<Vector> admissible_starts(const Box& box, int random_count, const Objective& f) {
  std::vector<Vector> starts;
  for (Vector& s : default_starts(box, random_count)) {
    double v;
    try {
      v = f(s);
    } catch (const Error&) {
      continue;
    }
    if (std::isfinite(v)) starts.push_back(std::move(s));
  }
  return starts;
}

/// Start point derived from a moment estimate of A, projected into the box.
std::optional<Vector> moment_start(const ModelSpec& model, const Matrix& a_sq) {
  if (!model.alpha_from_diffusion_sq || !a_sq.allFinite()) return std::nullopt;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a_sq + a_sq.transpose()));
  const double floor = 1e-8 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  const Vector clipped = eig.eigenvalues().cwiseMax(floor);
  const Matrix psd = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  try {
    const Vector alpha = model.alpha_from_diffusion_sq(0.5 * (psd + psd.transpose()));
    if (alpha.size() != model.m1 || !alpha.allFinite()) return std::nullopt;
    return model.alpha_box.project(alpha);
  } catch (const Error&) {
    return std::nullopt;
  }
}

/// When A does not depend on x, any α with the same A(α) is an equally good
/// maximizer (e.g. both square roots of A for the OU family). Report the root
/// the model designates, if it lies in the box and reproduces A.
Vector canonical_alpha(const ModelSpec& model, const Vector& alpha) {
  if (!model.alpha_from_diffusion_sq || model.diffusion_depends_on_state || model.m1 == 0) {
    return alpha;
  }
  const Vector x = Vector::Zero(model.d);
  const Matrix a_sq = model.diffusion_sq(x, alpha);
  try {
    const Vector root = model.alpha_from_diffusion_sq(a_sq);
    if (root.size() != alpha.size() || !root.allFinite() || !model.alpha_box.contains(root)) {
      return alpha;
    }
    const double gap = (model.diffusion_sq(x, root) - a_sq).cwiseAbs().maxCoeff();
    return gap <= 1e-10 * std::max(1.0, a_sq.cwiseAbs().maxCoeff()) ? root : alpha;
  } catch (const Error&) {
    return alpha;
  }
}

StageResult run_stage_optimizer(const char* stage, const Box& box, const Objective& f,
                                const EstimatorOptions& options,
                                const std::optional<Vector>& seed = std::nullopt) {
  std::vector<Vector> starts = admissible_starts(box, options.random_starts, f);
  if (seed && std::isfinite(f(*seed))) starts.insert(starts.begin(), *seed);
  if (starts.empty()) {
    throw DegenerateDataError(std::string(stage) +
                              ": objective is not finite at any start point");
  }
  BoxProblem problem;
  problem.objective = f;
  problem.box = box;
  problem.starts = std::move(starts);
  problem.max_iters = options.max_iters;
  problem.tol = options.tol;
  problem.method = options.method;
  OptimizationResult opt = maximize(problem);
  if (!opt.report.converged) {
    throw ConvergenceError(std::string(stage) + ": optimizer did not converge after " +
                               std::to_string(opt.report.iterations) + " iterations",
                           opt.argmax, opt.value);
  }
  return StageResult{opt.argmax, opt.value, std::move(opt.report)};
}

template <typename F>
auto in_stage(const std::string& stage, F&& body) -> decltype(body()) {
  const std::string prefix = "stage '" + stage + "': ";
  try {
    return body();
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(prefix + e.what(), e.best_point(), e.best_value());
  } catch (const SingularMatrixError& e) {
    throw SingularMatrixError(prefix + e.what(), e.block(), e.determinant());
  } catch (const DegenerateDataError& e) {
    throw DegenerateDataError(prefix + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  }
}

Vector fourth_moments_or_gaussian(const Vector& given, int d) {
  if (given.size() == 0) return Vector::Constant(d, 3.0);
  if (given.size() != d) {
    throw InvalidArgument("plugin_covariance: expected " + std::to_string(d) +
                          " fourth moments, got " + std::to_string(given.size()));
  }
  return given;
}

Matrix sym(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix checked_inverse(const Matrix& m, const char* what) {
  Eigen::FullPivLU<Matrix> lu(m);
  if (!lu.isInvertible() || !m.allFinite()) {
    throw SingularMatrixError(std::string("plugin_covariance: ") + what + " is singular", -1,
                              m.allFinite() ? m.determinant() : 0.0);
  }
  return lu.inverse();
}

}  // namespace

Matrix estimate_lambda(const ObservationSeries& obs) { return estimate_lambda(obs.values); }

// ---------------------------------------------------------------- H1

H1Objective::H1Objective(const LocalMeanSeries& lm, const Matrix& lambda,
                         const ModelSpec& model)
    : lm_(&lm), model_(&model) {
  if (lambda.rows() != model.d || lambda.cols() != model.d) {
    throw InvalidArgument("qlik_h1: lambda must be d x d");
  }
  if (lm.dim() != model.d) {
    throw InvalidArgument("qlik_h1: local means have the wrong dimension");
  }
  increments_ = block_increments(lm);
  noise_term_ = lm.scheme.noise_multiplier() * lambda;
  scale_ = 2.0 / 3.0 * lm.scheme.delta;
  if (!model.diffusion_depends_on_state) {
    increment_outer_ = Matrix::Zero(model.d, model.d);
    for (int c = 0; c < model.d; ++c) {
      for (int r = c; r < model.d; ++r) {
        CompensatedSum s;
        for (Eigen::Index j = 0; j < increments_.rows(); ++j) {
          s.add(increments_(j, r) * increments_(j, c));
        }
        increment_outer_(r, c) = s.value();
        increment_outer_(c, r) = s.value();
      }
    }
  }
}

Matrix H1Objective::covariance(const Vector& x, const Vector& alpha) const {
  return model_->diffusion_sq(x, alpha) + noise_term_;
}

double H1Objective::operator()(const Vector& alpha) const {
  const Eigen::Index terms = increments_.rows();
  if (!model_->diffusion_depends_on_state) {
    const Matrix cov = covariance(lm_->row(0), alpha);
    const auto llt = checked_llt(cov, "qlik_h1", 1);
    const double quad = llt.solve(increment_outer_).trace() / scale_;
    return -0.5 * (quad + static_cast<double>(terms) * log_det(llt));
  }
  CompensatedSum sum;
  for (Eigen::Index j = 0; j < terms; ++j) {
    const Matrix cov = covariance(lm_->means.row(j).transpose(), alpha);
    const auto llt = checked_llt(cov, "qlik_h1", static_cast<long>(j + 1));
    const Vector s = increments_.row(j).transpose();
    sum.add(s.dot(llt.solve(s)) / scale_ + log_det(llt));
  }
  return -0.5 * sum.value();
}

Vector H1Objective::gradient(const Vector& alpha) const {
  const int m1 = model_->m1;
  Vector grad = Vector::Zero(m1);
  const Eigen::Index terms = increments_.rows();
  if (!model_->diffusion_depends_on_state) {
    const Vector x = lm_->row(0);
    const Matrix cov = covariance(x, alpha);
    const auto llt = checked_llt(cov, "qlik_h1", 1);
    const Matrix inv = llt.solve(Matrix::Identity(model_->d, model_->d));
    const Matrix weighted = inv * increment_outer_ * inv;
    const auto dA = model_->diffusion_sq_derivatives(x, alpha);
    for (int k = 0; k < m1; ++k) {
      grad[k] = static_cast<double>(terms) * (inv * dA[k]).trace() -
                (weighted * dA[k]).trace() / scale_;
    }
    return -0.5 * grad;
  }
  for (Eigen::Index j = 0; j < terms; ++j) {
    const Vector x = lm_->means.row(j).transpose();
    const Matrix cov = covariance(x, alpha);
    const auto llt = checked_llt(cov, "qlik_h1", static_cast<long>(j + 1));
    const Matrix inv = llt.solve(Matrix::Identity(model_->d, model_->d));
    const Vector w = inv * increments_.row(j).transpose();
    const auto dA = model_->diffusion_sq_derivatives(x, alpha);
    for (int k = 0; k < m1; ++k) {
      grad[k] += (inv * dA[k]).trace() - w.dot(dA[k] * w) / scale_;
    }
  }
  return -0.5 * grad;
}

double qlik_h1(const Vector& alpha, const Matrix& lambda, const LocalMeanSeries& lm,
               const ModelSpec& model) {
  return H1Objective(lm, lambda, model)(alpha);
}

// ---------------------------------------------------------------- H2

H2Objective::H2Objective(const LocalMeanSeries& lm, const Vector& alpha, const ModelSpec& model)
    : lm_(&lm), model_(&model), delta_(lm.scheme.delta) {
  if (lm.dim() != model.d) {
    throw InvalidArgument("qlik_h2: local means have the wrong dimension");
  }
  if (alpha.size() != model.m1) {
    throw InvalidArgument("qlik_h2: alpha has the wrong dimension");
  }
  increments_ = block_increments(lm);
  const Eigen::Index terms = increments_.rows();
  const Matrix eye = Matrix::Identity(model.d, model.d);
  if (!model.diffusion_depends_on_state) {
    const auto llt = checked_llt(delta_ * model.diffusion_sq(lm.row(0), alpha), "qlik_h2", 1);
    precision_.push_back(llt.solve(eye));
  } else {
    precision_.reserve(static_cast<std::size_t>(terms));
    for (Eigen::Index j = 0; j < terms; ++j) {
      const auto llt = checked_llt(
          delta_ * model.diffusion_sq(lm.means.row(j).transpose(), alpha), "qlik_h2",
          static_cast<long>(j + 1));
      precision_.push_back(llt.solve(eye));
    }
  }

  if (model.drift_design) {
    quadratic_ = true;
    linear_ = Vector::Zero(model.m2);
    quad_ = Matrix::Zero(model.m2, model.m2);
    CompensatedSum constant;
    for (Eigen::Index j = 0; j < terms; ++j) {
      const Matrix& prec = precision_.size() == 1 ? precision_[0] : precision_[j];
      const AffineDrift aff = model.drift_design(lm.means.row(j).transpose());
      const Vector u = increments_.row(j).transpose() - delta_ * aff.offset;
      const Vector pu = prec * u;
      constant.add(u.dot(pu));
      linear_.noalias() += delta_ * aff.design.transpose() * pu;
      quad_.noalias() += delta_ * delta_ * aff.design.transpose() * prec * aff.design;
    }
    constant_ = constant.value();
    quad_ = sym(quad_);
  }
}

double H2Objective::operator()(const Vector& beta) const {
  if (quadratic_) {
    return -0.5 * constant_ + shifted(beta);
  }
  CompensatedSum sum;
  for (Eigen::Index j = 0; j < increments_.rows(); ++j) {
    const Matrix& prec = precision_.size() == 1 ? precision_[0] : precision_[j];
    const Vector x = lm_->means.row(j).transpose();
    const Vector r = increments_.row(j).transpose() - delta_ * model_->drift(x, beta);
    sum.add(r.dot(prec * r));
  }
  return -0.5 * sum.value();
}

double H2Objective::shifted(const Vector& beta) const {
  if (!quadratic_) {
    return (*this)(beta);
  }
  return 0.5 * beta.dot(2.0 * linear_ - quad_ * beta);
}

std::optional<Vector> H2Objective::vertex() const {
  if (!quadratic_) return std::nullopt;
  const Eigen::LLT<Matrix> llt(quad_);
  if (llt.info() != Eigen::Success) return std::nullopt;
  Vector v = llt.solve(linear_);
  if (!v.allFinite()) return std::nullopt;
  return v;
}

Vector H2Objective::gradient(const Vector& beta) const {
  if (quadratic_) {
    return linear_ - quad_ * beta;
  }
  Vector grad = Vector::Zero(model_->m2);
  for (Eigen::Index j = 0; j < increments_.rows(); ++j) {
    const Matrix& prec = precision_.size() == 1 ? precision_[0] : precision_[j];
    const Vector x = lm_->means.row(j).transpose();
    const Vector r = increments_.row(j).transpose() - delta_ * model_->drift(x, beta);
    grad.noalias() += delta_ * model_->drift_derivative(x, beta).transpose() * (prec * r);
  }
  return grad;
}

double qlik_h2(const Vector& beta, const Vector& alpha, const LocalMeanSeries& lm,
               const ModelSpec& model) {
  return H2Objective(lm, alpha, model)(beta);
}

// ---------------------------------------------------------------- stages

StageResult estimate_alpha(const LocalMeanSeries& lm, const Matrix& lambda_hat,
                           const ModelSpec& model, const EstimatorOptions& options) {
  model.validate();
  const H1Objective h1(lm, lambda_hat, model);
  if (model.m1 == 0) {
    StageResult out;
    out.estimate = Vector(0);
    out.value = h1(out.estimate);
    out.report.converged = true;
    return out;
  }
  // (3/(2Δ)) E[ΔȲ ΔȲᵀ] − 3Δ^((2−τ)/(τ−1)) Λ̂ estimates A.
  const Matrix s = block_increments(lm);
  const Matrix a_sq = 1.5 / (lm.scheme.delta * static_cast<double>(s.rows())) *
                          (s.transpose() * s) -
                      lm.scheme.noise_multiplier() * lambda_hat;
  StageResult out = run_stage_optimizer("estimate_alpha", model.alpha_box,
                                         [&h1](const Vector& a) { return h1(a); }, options,
                                         moment_start(model, a_sq));
  out.estimate = canonical_alpha(model, out.estimate);
  return out;
}

StageResult estimate_beta(const LocalMeanSeries& lm, const Vector& alpha_hat,
                          const ModelSpec& model, const EstimatorOptions& options) {
  model.validate();
  const H2Objective h2(lm, alpha_hat, model);
  if (model.m2 == 0) {
    StageResult out;
    out.estimate = Vector(0);
    out.value = h2(out.estimate);
    out.report.converged = true;
    return out;
  }
  StageResult out = run_stage_optimizer(
      "estimate_beta", model.beta_box, [&h2](const Vector& b) { return h2.shifted(b); },
      options);
  const double simplex_value = h2.shifted(out.estimate);
  if (const auto v = h2.vertex(); v && model.beta_box.contains(*v) &&
                                  h2.shifted(*v) >= simplex_value - 1e-10 * (1.0 + std::abs(simplex_value))) {
    out.estimate = *v;
  }
  out.value = h2(out.estimate);
  return out;
}

EstimationResult estimate_adaptive(const ObservationSeries& obs, const SamplingScheme& scheme,
                                   const ModelSpec& model, bool with_cov,
                                   const EstimatorOptions& options) {
  in_stage("validate", [&] {
    obs.validate();
    model.validate();
    if (obs.dim() != model.d) {
      throw InvalidArgument("observations are " + std::to_string(obs.dim()) +
                            "-dimensional, model expects " + std::to_string(model.d));
    }
    if (scheme.n != obs.n()) {
      throw InvalidArgument("scheme was derived for n = " + std::to_string(scheme.n) +
                            " but the series has " + std::to_string(obs.n()) + " increments");
    }
    return 0;
  });

  EstimationResult result;
  result.scheme = scheme;
  result.lambda_hat = in_stage("lambda", [&] { return estimate_lambda(obs); });
  result.theta_eps_hat = vech(result.lambda_hat);
  const LocalMeanSeries lm = in_stage("local_means", [&] { return local_means(obs, scheme); });

  StageResult alpha =
      in_stage("alpha", [&] { return estimate_alpha(lm, result.lambda_hat, model, options); });
  result.alpha_hat = alpha.estimate;
  result.h1_value = alpha.value;
  result.alpha_report = std::move(alpha.report);

  StageResult beta =
      in_stage("beta", [&] { return estimate_beta(lm, result.alpha_hat, model, options); });
  result.beta_hat = beta.estimate;
  result.h2_value = beta.value;
  result.beta_report = std::move(beta.report);

  if (with_cov) {
    result.cov = in_stage("covariance", [&] {
      return plugin_covariance(lm, result, model, options.noise_fourth_moments);
    });
    result.cov_labels = covariance_labels(model.d, model.m1, model.m2);
  }
  return result;
}

// ---------------------------------------------------------------- covariance

std::vector<std::string> covariance_labels(int d, int m1, int m2) {
  std::vector<std::string> labels;
  for (int col = 0; col < d; ++col) {
    for (int row = col; row < d; ++row) {
      labels.push_back("theta_eps(" + std::to_string(row + 1) + "," + std::to_string(col + 1) +
                       ")");
    }
  }
  for (int i = 0; i < m1; ++i) labels.push_back("alpha" + std::to_string(i + 1));
  for (int i = 0; i < m2; ++i) labels.push_back("beta" + std::to_string(i + 1));
  return labels;
}

Matrix plugin_covariance(const LocalMeanSeries& lm, const EstimationResult& result,
                         const ModelSpec& model, const Vector& noise_fourth_moments) {
  const int d = model.d;
  const int m1 = model.m1;
  const int m2 = model.m2;
  const int q = d * (d + 1) / 2;
  if (result.alpha_hat.size() != m1 || result.beta_hat.size() != m2 ||
      result.lambda_hat.rows() != d) {
    throw InvalidArgument("plugin_covariance: estimates do not match the model dimensions");
  }
  const Vector mu4 = fourth_moments_or_gaussian(noise_fourth_moments, d);
  const Matrix& lam = result.lambda_hat;
  const Matrix root = psd_sqrt(lam);

  std::vector<std::pair<int, int>> pairs;
  for (int col = 0; col < d; ++col) {
    for (int row = col; row < d; ++row) pairs.emplace_back(row, col);
  }
  Matrix w1(q, q);
  for (int a = 0; a < q; ++a) {
    const auto [l1, l2] = pairs[a];
    for (int b = 0; b < q; ++b) {
      const auto [l3, l4] = pairs[b];
      double excess = 0.0;
      for (int k = 0; k < d; ++k) {
        excess += root(l1, k) * root(l2, k) * root(l3, k) * root(l4, k) * (mu4[k] - 3.0);
      }
      w1(a, b) = excess + 1.5 * (lam(l1, l3) * lam(l2, l4) + lam(l1, l4) * lam(l2, l3));
    }
  }

  const long k = lm.k();
  if (k < 1) {
    throw DegenerateDataError("plugin_covariance: no local means");
  }
  const double inv_k = 1.0 / static_cast<double>(k);
  const bool tau_two = lm.scheme.tau == 2.0;
  const Matrix eye = Matrix::Identity(d, d);

  Matrix alpha_cov(m1, m1);
  if (m1 > 0) {
    Matrix info = Matrix::Zero(m1, m1);
    Matrix hess = Matrix::Zero(m1, m1);
    for (long j = 0; j < k; ++j) {
      const Vector x = lm.row(j);
      const Matrix a_sq = model.diffusion_sq(x, result.alpha_hat);
      const Matrix a_tau = tau_two ? Matrix(a_sq + 3.0 * lam) : a_sq;
      const auto llt = checked_llt(a_tau, "plugin_covariance", j);
      const Matrix inv = llt.solve(eye);
      const auto dA = model.diffusion_sq_derivatives(x, result.alpha_hat);
      std::vector<Matrix> inv_dA(static_cast<std::size_t>(m1));
      std::vector<Matrix> bbar(static_cast<std::size_t>(m1));
      for (int i = 0; i < m1; ++i) {
        inv_dA[i] = inv * dA[i];
        bbar[i] = sym(0.75 * inv_dA[i] * inv);
      }
      for (int i1 = 0; i1 < m1; ++i1) {
        for (int i2 = 0; i2 < m1; ++i2) {
          hess(i1, i2) += 0.5 * (inv_dA[i1] * inv_dA[i2]).trace();
          const Matrix b1a = bbar[i1] * a_sq;
          double w2 = (b1a * bbar[i2] * a_sq).trace();
          if (tau_two) {
            w2 += 4.0 * (b1a * bbar[i2] * lam).trace() +
                  12.0 * (bbar[i1] * lam * bbar[i2] * lam).trace();
          }
          info(i1, i2) += w2;
        }
      }
    }
    hess *= inv_k;
    info *= inv_k;
    const Matrix hess_inv = checked_inverse(sym(hess), "alpha information J");
    alpha_cov = sym(hess_inv * sym(info) * hess_inv);
  }

  Matrix beta_cov(m2, m2);
  if (m2 > 0) {
    Matrix info = Matrix::Zero(m2, m2);
    for (long j = 0; j < k; ++j) {
      const Vector x = lm.row(j);
      const auto llt = checked_llt(model.diffusion_sq(x, result.alpha_hat), "plugin_covariance", j);
      const Matrix jac = model.drift_derivative(x, result.beta_hat);
      info.noalias() += jac.transpose() * llt.solve(jac);
    }
    info *= inv_k;
    beta_cov = sym(checked_inverse(sym(info), "drift information"));
  }

  Matrix cov = Matrix::Zero(q + m1 + m2, q + m1 + m2);
  cov.topLeftCorner(q, q) = w1;
  cov.block(q, q, m1, m1) = alpha_cov;
  cov.bottomRightCorner(m2, m2) = beta_cov;
  return cov;
}

Vector standard_errors(const EstimationResult& result) {
  if (!result.cov) {
    throw InvalidArgument("standard_errors: result carries no covariance");
  }
  const Matrix& cov = *result.cov;
  const Eigen::Index q = result.theta_eps_hat.size();
  const Eigen::Index m1 = result.alpha_hat.size();
  const double n = static_cast<double>(result.scheme.n);
  const double k = static_cast<double>(result.scheme.k);
  Vector se(cov.rows());
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    const double rate = i < q ? std::sqrt(n) : i < q + m1 ? std::sqrt(k) : std::sqrt(n * result.scheme.h);
    se[i] = std::sqrt(std::max(cov(i, i), 0.0)) / rate;
  }
  return se;
}

// ---------------------------------------------------------------- LGA

double qlik_lga(const Vector& alpha, const Vector& beta, const ObservationSeries& obs,
                const ModelSpec& model) {
  const double h = obs.h;
  CompensatedSum sum;
  for (long i = 0; i < obs.n(); ++i) {
    const Vector x = obs.values.row(i).transpose();
    const auto llt = checked_llt(model.diffusion_sq(x, alpha), "qlik_lga", i);
    const Vector r = obs.values.row(i + 1).transpose() - x - h * model.drift(x, beta);
    sum.add(r.dot(llt.solve(r)) / h + log_det(llt));
  }
  return -0.5 * sum.value();
}

namespace {

// Sufficient statistics of the LGA objective for a drift b = Fβ + g, given the
// per-increment precisions W_i = A(Y_i, α)⁻¹:
//   Σ rᵀ W r = c − 2h βᵀ rhs + h² βᵀ G β,  r = u − hFβ,  u = ΔY − h g.
struct LgaQuadratic {
  double c = 0.0;
  Vector rhs;
  Matrix gram;
  double log_det_sum = 0.0;
};

class LgaProfile {
 public:
  LgaProfile(const ObservationSeries& obs, const ModelSpec& model) : obs_(obs), model_(model) {
    const int d = model.d;
    const int m2 = model.m2;
    if (model.diffusion_depends_on_state) return;
    // A does not depend on x: precompute Σ F[a,:]ᵀF[b,:], Σ F[a,:]ᵀ u_b, Σ u uᵀ.
    cross_.assign(static_cast<std::size_t>(d * d), Matrix::Zero(m2, m2));
    mixed_.assign(static_cast<std::size_t>(d * d), Vector::Zero(m2));
    outer_ = Matrix::Zero(d, d);
    for (long i = 0; i < obs.n(); ++i) {
      const Vector x = obs.values.row(i).transpose();
      const AffineDrift aff = model.drift_design(x);
      const Vector u = obs.values.row(i + 1).transpose() - x - obs.h * aff.offset;
      outer_.noalias() += u * u.transpose();
      for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
          cross_[a * d + b].noalias() += aff.design.row(a).transpose() * aff.design.row(b);
          mixed_[a * d + b].noalias() += aff.design.row(a).transpose() * u[b];
        }
      }
    }
  }

  LgaQuadratic stats(const Vector& alpha) const {
    const int d = model_.d;
    const int m2 = model_.m2;
    const Matrix eye = Matrix::Identity(d, d);
    LgaQuadratic out;
    out.rhs = Vector::Zero(m2);
    out.gram = Matrix::Zero(m2, m2);
    if (!model_.diffusion_depends_on_state) {
      const auto llt = checked_llt(model_.diffusion_sq(obs_.values.row(0).transpose(), alpha),
                                   "qlik_lga", 0);
      const Matrix w = llt.solve(eye);
      for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
          out.gram += w(a, b) * cross_[a * d + b];
          out.rhs += w(a, b) * mixed_[a * d + b];
        }
      }
      out.c = (w * outer_).trace();
      out.log_det_sum = static_cast<double>(obs_.n()) * log_det(llt);
      return out;
    }
    CompensatedSum c;
    CompensatedSum ld;
    for (long i = 0; i < obs_.n(); ++i) {
      const Vector x = obs_.values.row(i).transpose();
      const auto llt = checked_llt(model_.diffusion_sq(x, alpha), "qlik_lga", i);
      const Matrix w = llt.solve(eye);
      const AffineDrift aff = model_.drift_design(x);
      const Vector u = obs_.values.row(i + 1).transpose() - x - obs_.h * aff.offset;
      const Vector wu = w * u;
      c.add(u.dot(wu));
      ld.add(log_det(llt));
      out.rhs.noalias() += aff.design.transpose() * wu;
      out.gram.noalias() += aff.design.transpose() * w * aff.design;
    }
    out.c = c.value();
    out.log_det_sum = ld.value();
    return out;
  }

  /// Profiled β̂(α) and the LGA value there.
  std::pair<Vector, double> evaluate(const Vector& alpha) const {
    const LgaQuadratic s = stats(alpha);
    const double h = obs_.h;
    const Matrix gram = sym(s.gram);
    Vector beta = (h * gram).ldlt().solve(s.rhs);
    if (!beta.allFinite() || !model_.beta_box.contains(beta)) {
      beta = constrained_beta(s, beta.allFinite() ? beta : model_.beta_box.center());
    }
    const double resid = s.c - 2.0 * h * beta.dot(s.rhs) + h * h * beta.dot(gram * beta);
    return {beta, -0.5 * (resid / h + s.log_det_sum)};
  }

 private:
  Vector constrained_beta(const LgaQuadratic& s, const Vector& unconstrained) const {
    const double h = obs_.h;
    BoxProblem problem;
    problem.box = model_.beta_box;
    problem.objective = [&s, h](const Vector& b) {
      return 2.0 * h * b.dot(s.rhs) - h * h * b.dot(s.gram * b);
    };
    problem.starts = {model_.beta_box.project(unconstrained), model_.beta_box.center()};
    return maximize(problem).argmax;
  }

  const ObservationSeries& obs_;
  const ModelSpec& model_;
  std::vector<Matrix> cross_;
  std::vector<Vector> mixed_;
  Matrix outer_;
};

}  // namespace

LgaResult estimate_lga(const ObservationSeries& obs, const ModelSpec& model,
                       const EstimatorOptions& options) {
  model.validate();
  obs.validate();
  if (obs.n() < 2) {
    throw DegenerateDataError("estimate_lga: need at least 2 increments");
  }
  if (obs.dim() != model.d) {
    throw InvalidArgument("estimate_lga: observation dimension does not match the model");
  }

  // Realized covariance per unit time estimates A when there is no noise.
  const Matrix inc = obs.values.bottomRows(obs.n()) - obs.values.topRows(obs.n());
  const std::optional<Vector> alpha_seed = moment_start(
      model, (inc.transpose() * inc) / (static_cast<double>(obs.n()) * obs.h));

  LgaResult out;
  if (model.drift_design) {
    out.profiled = true;
    const LgaProfile profile(obs, model);
    const Objective f = [&profile](const Vector& a) { return profile.evaluate(a).second; };
    if (model.m1 == 0) {
      auto [beta, value] = profile.evaluate(Vector(0));
      out.alpha = Vector(0);
      out.beta = beta;
      out.value = value;
      out.report.converged = true;
      return out;
    }
    StageResult stage =
        run_stage_optimizer("estimate_lga", model.alpha_box, f, options, alpha_seed);
    out.alpha = canonical_alpha(model, stage.estimate);
    out.beta = profile.evaluate(out.alpha).first;
    out.value = stage.value;
    out.report = std::move(stage.report);
    return out;
  }

  const int m1 = model.m1;
  const int m2 = model.m2;
  Vector lower(m1 + m2);
  Vector upper(m1 + m2);
  lower << model.alpha_box.lower, model.beta_box.lower;
  upper << model.alpha_box.upper, model.beta_box.upper;
  const Box joint(lower, upper);
  const Objective f = [&](const Vector& theta) {
    return qlik_lga(theta.head(m1), theta.tail(m2), obs, model);
  };
  std::optional<Vector> seed;
  if (alpha_seed) {
    seed = Vector(m1 + m2);
    *seed << *alpha_seed, model.beta_box.center();
  }
  StageResult stage = run_stage_optimizer("estimate_lga", joint, f, options, seed);
  out.alpha = canonical_alpha(model, stage.estimate.head(m1));
  out.beta = stage.estimate.tail(m2);
  out.value = stage.value;
  out.report = std::move(stage.report);
  return out;
}

}  // namespace diffnoise
