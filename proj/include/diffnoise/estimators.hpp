#pragma once

#include <optional>
#include <string>
#include <vector>

#include "diffnoise/local_means.hpp"
#include "diffnoise/optimizer.hpp"

namespace diffnoise {

struct EstimatorOptions {
  OptimizerMethod method = OptimizerMethod::nelder_mead;
  int random_starts = 4;
  double tol = 1e-8;
  int max_iters = 0;  // 0: 500 × free dimension
  /// E|ε⁽ᵏ⁾|⁴ used by the noise-variance block of the plug-in covariance;
  /// empty means Gaussian (3 for every component).
  Vector noise_fourth_moments;
};

/// Output of one optimization stage.
struct StageResult {
  Vector estimate;
  double value = 0.0;
  OptimizerReport report;
};

struct EstimationResult {
  SamplingScheme scheme;
  Matrix lambda_hat;
  Vector theta_eps_hat;  // vech(lambda_hat)
  Vector alpha_hat;
  Vector beta_hat;
  double h1_value = 0.0;
  double h2_value = 0.0;
  OptimizerReport alpha_report;
  OptimizerReport beta_report;
  /// Block-diagonal covariance of (√n(θ̂_ε−θ_ε), √k(α̂−α), √(nh)(β̂−β)).
  std::optional<Matrix> cov;
  std::vector<std::string> cov_labels;
};

/// Λ̂ = (1/2n) Σ_{i<n} (Y_{i+1} − Y_i)(Y_{i+1} − Y_i)ᵀ, exactly symmetric.
template <typename Derived>
Matrix estimate_lambda(const Eigen::MatrixBase<Derived>& rows) {
  const Eigen::Index n = rows.rows() - 1;
  const Eigen::Index d = rows.cols();
  if (n < 1) {
    throw DegenerateDataError("estimate_lambda: need at least one increment");
  }
  if (!rows.allFinite()) {
    throw InvalidArgument("estimate_lambda: non-finite observation");
  }
  Matrix acc = Matrix::Zero(d, d);
  Vector inc(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    inc = (rows.row(i + 1) - rows.row(i)).transpose();
    for (Eigen::Index c = 0; c < d; ++c) {
      for (Eigen::Index r = c; r < d; ++r) acc(r, c) += inc[r] * inc[c];
    }
  }
  acc /= 2.0 * static_cast<double>(n);
  acc.template triangularView<Eigen::StrictlyUpper>() = acc.transpose();
  return acc;
}

Matrix estimate_lambda(const ObservationSeries& obs);

/// H₁(α | Λ) over the blocks j = 1..k−2, with Aₙ = A(Ȳ_{j−1}, α) + 3Δ^((2−τ)/(τ−1))Λ.
/// Precomputes what does not depend on α; evaluate repeatedly.
class H1Objective {
 public:
  H1Objective(const LocalMeanSeries& lm, const Matrix& lambda, const ModelSpec& model);

  /// Throws SingularMatrixError naming the block if Aₙ is not positive definite.
  double operator()(const Vector& alpha) const;
  /// Analytic gradient from ∂A/∂α (model-supplied or central differences).
  Vector gradient(const Vector& alpha) const;

 private:
  Matrix covariance(const Vector& x, const Vector& alpha) const;

  const LocalMeanSeries* lm_;
  const ModelSpec* model_;
  Matrix noise_term_;
  double scale_;  // (2/3)Δ
  Matrix increments_;  // (k−2) × d, row j−1 = Ȳ_{j+1} − Ȳ_j
  Matrix increment_outer_;  // Σ_j s_j s_jᵀ, used when A does not depend on x
};

/// H₂(β | α) = −½ Σ_{j=1}^{k−2} ⟨(Δ A(Ȳ_{j−1}, α))⁻¹, (Ȳ_{j+1} − Ȳ_j − Δ b(Ȳ_{j−1}, β))^{⊗2}⟩.
/// α is fixed at construction, so the block precisions are computed once; for
/// drifts affine in β the objective collapses to an explicit quadratic.
class H2Objective {
 public:
  H2Objective(const LocalMeanSeries& lm, const Vector& alpha, const ModelSpec& model);

  double operator()(const Vector& beta) const;
  Vector gradient(const Vector& beta) const;
  /// Objective up to a β-independent constant; same argmax, better conditioned.
  double shifted(const Vector& beta) const;
  bool is_quadratic() const { return quadratic_; }
  /// Unconstrained maximizer of a strictly concave quadratic objective.
  std::optional<Vector> vertex() const;

 private:
  const LocalMeanSeries* lm_;
  const ModelSpec* model_;
  double delta_;
  std::vector<Matrix> precision_;  // (Δ A_j)⁻¹
  Matrix increments_;
  bool quadratic_ = false;
  double constant_ = 0.0;  // Σ uᵀ M u
  Vector linear_;          // Σ Δ Fᵀ M u
  Matrix quad_;            // Σ Δ² Fᵀ M F
};

double qlik_h1(const Vector& alpha, const Matrix& lambda, const LocalMeanSeries& lm,
               const ModelSpec& model);
double qlik_h2(const Vector& beta, const Vector& alpha, const LocalMeanSeries& lm,
               const ModelSpec& model);

/// argmax of H₁(· | Λ̂) over Θ₁. The search is also started from a moment
/// estimate of A when the model supplies `alpha_from_diffusion_sq`; for
/// state-independent A that hook also picks which of several α with the same
/// A(α) is reported. Throws ConvergenceError with the best point when the
/// winning start does not converge.
StageResult estimate_alpha(const LocalMeanSeries& lm, const Matrix& lambda_hat,
                           const ModelSpec& model, const EstimatorOptions& options = {});

/// argmax of H₂(· | α̂) over Θ₂. When H₂ is quadratic in β and its vertex
/// lies in the box and beats the simplex result, the vertex is returned.
StageResult estimate_beta(const LocalMeanSeries& lm, const Vector& alpha_hat,
                          const ModelSpec& model, const EstimatorOptions& options = {});

/// Λ̂ → local means → α̂ → β̂, optionally with the plug-in covariance.
/// Errors are rethrown with the failing stage named.
EstimationResult estimate_adaptive(const ObservationSeries& obs, const SamplingScheme& scheme,
                                   const ModelSpec& model, bool with_cov,
                                   const EstimatorOptions& options = {});

/// Sandwich (Jᵗ)⁻¹Iᵗ(Jᵗ)⁻¹ with invariant-measure integrals replaced by
/// averages over the local means Ȳ_0..Ȳ_{k−1}. Blocks: noise variance (in
/// vech order), α, β; a block is absent when its dimension is zero.
Matrix plugin_covariance(const LocalMeanSeries& lm, const EstimationResult& result,
                         const ModelSpec& model, const Vector& noise_fourth_moments);

/// Labels matching the rows of plugin_covariance.
std::vector<std::string> covariance_labels(int d, int m1, int m2);

/// Standard errors on the parameter scale: sqrt(diag(cov)) / rate.
Vector standard_errors(const EstimationResult& result);

/// Raw-increment Gaussian quasi-likelihood used by the LGA baseline.
double qlik_lga(const Vector& alpha, const Vector& beta, const ObservationSeries& obs,
                const ModelSpec& model);

struct LgaResult {
  Vector alpha;
  Vector beta;
  double value = 0.0;
  OptimizerReport report;
  bool profiled = false;  // β solved in closed form for each α
};

/// Simultaneous LGA estimator: maximizes qlik_lga over Θ₁ × Θ₂. Drifts affine
/// in β are profiled out by generalized least squares.
LgaResult estimate_lga(const ObservationSeries& obs, const ModelSpec& model,
                       const EstimatorOptions& options = {});

}  // namespace diffnoise
