#pragma once

// Scatter matrices, the trace-ratio and generalized-eigen transform
// optimizers, and the Fisher scaling for the two-class linear rule.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "repobs/error.hpp"
#include "repobs/linalg.hpp"
#include "repobs/models.hpp"
#include "repobs/parallel.hpp"
#include "repobs/random.hpp"

namespace repobs {

struct ScatterSet {
  Matrix S_W;  // Σ C_j
  Matrix S_B;  // Σ (x̄ - x_j)(x̄ - x_j)ᵀ
  Matrix S_C;  // Σ x_j x_jᵀ
  Vector x_bar;
  bool degenerate = false;  // S_B vanishes: the class means coincide
};

/// Scatter matrices from the class means and covariances. epsilon > 0 adds εI to S_W.
inline ScatterSet scatter_matrices(const std::vector<Vector>& means, const std::vector<Matrix>& covariances,
                                   double epsilon = 0.0) {
  const std::size_t M = means.size();
  require(M >= 2 && covariances.size() == M, ErrorKind::dimension, "need matching means and covariances");
  const std::size_t d = means[0].size();
  ScatterSet s{Matrix(d, d), Matrix(d, d), Matrix(d, d), Vector(d)};
  for (std::size_t j = 0; j < M; ++j) {
    require(means[j].size() == d && covariances[j].rows() == d, ErrorKind::dimension, "mixed dimensions");
    s.S_W += covariances[j];
    s.S_C += Matrix::outer(means[j], means[j]);
    s.x_bar += means[j];
  }
  s.x_bar *= 1.0 / static_cast<double>(M);
  for (const auto& m : means) {
    const Vector g = s.x_bar - m;
    s.S_B += Matrix::outer(g, g);
  }
  if (epsilon > 0.0) s.S_W += Matrix::identity(d) * epsilon;
  s.S_W = symmetrized(s.S_W);
  s.S_B = symmetrized(s.S_B);
  s.S_C = symmetrized(s.S_C);
  cholesky(s.S_W);
  double spread = 0.0;
  for (const auto& m : means) spread = std::max(spread, squared_norm(m));
  s.degenerate = !(s.S_B.max_abs() > 1e-14 * std::max(spread, 1.0));
  return s;
}

inline ScatterSet scatter_matrices(const Problem& problem, double epsilon = 0.0) {
  std::vector<Vector> means;
  for (const auto& c : problem.classes) means.push_back(class_mean(c));
  return scatter_matrices(means, problem.covariances(), epsilon);
}

/// tr(AᵀS_BA) / tr(AᵀS_WA)
inline double trace_ratio(const Matrix& a, const Matrix& s_b, const Matrix& s_w) {
  return trace_congruence(a, s_b) / trace_congruence(a, s_w);
}

struct TraceRatioResult {
  Matrix A;
  std::vector<double> rho_history;  // ρ_0 from A₀, then one entry per accepted iterate
  double rho_star = 0.0;
  double gamma = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool degenerate_selection = false;  // tie at the M-th eigenvalue of S_B - ρS_W
};

/// Σ of the M smallest over Σ of the M largest eigenvalues of S_W.
inline double convergence_gamma(const Matrix& s_w, std::size_t M) {
  const Vector lam = sym_eig(s_w).values;
  const std::size_t d = lam.size();
  double small = 0.0, large = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    large += lam[i];
    small += lam[d - 1 - i];
  }
  return small / large;
}

/// Fixed-point iteration A_k = top-M eigenvectors of S_B - ρ_{k-1} S_W under AᵀA = I.
/// An iterate that would lower ρ is rejected and ends the run.
inline TraceRatioResult trace_ratio_optimize(const Matrix& s_b, const Matrix& s_w, std::size_t M,
                                             double tol = 1e-10, std::size_t max_iter = 500,
                                             std::optional<Matrix> a0 = std::nullopt) {
  const std::size_t d = s_w.rows();
  require(s_b.rows() == d && s_b.cols() == d && s_w.cols() == d, ErrorKind::dimension, "S_B and S_W must be d×d");
  require(M >= 1 && M <= d, ErrorKind::dimension, "need 1 <= M <= d");
  const Matrix sw = symmetrized(s_w);
  const Matrix sb = symmetrized(s_b);
  cholesky(sw);
  if (!(sb.max_abs() > 0.0)) fail(ErrorKind::degenerate, "S_B is zero: class means coincide");

  TraceRatioResult r;
  r.gamma = convergence_gamma(sw, M);
  r.A = a0 ? orthonormalize_columns(*a0) : Matrix::identity(d).left_columns(M);
  require(r.A.rows() == d && r.A.cols() == M, ErrorKind::dimension, "A0 must be d×M");
  r.rho_history.push_back(trace_ratio(r.A, sb, sw));

  for (std::size_t k = 0; k < max_iter; ++k) {
    const double rho = r.rho_history.back();
    const EigenDecomposition e = sym_eig(sb - sw * rho);
    const Matrix next = orthonormalize_columns(e.vectors.left_columns(M));
    const double rho_next = trace_ratio(next, sb, sw);
    if (M < d && std::abs(e.values[M - 1] - e.values[M]) <= 1e-12 * std::max(1.0, std::abs(e.values[0])))
      r.degenerate_selection = true;
    if (rho_next < rho) {
      r.converged = true;
      break;
    }
    r.A = next;
    r.rho_history.push_back(rho_next);
    ++r.iterations;
    if (rho_next - rho <= tol) {
      r.converged = true;
      break;
    }
  }
  r.rho_star = r.rho_history.back();
  return r;
}

/// Seeded random orthonormal d×M matrix.
inline Matrix random_orthonormal(std::size_t d, std::size_t M, std::uint64_t seed) {
  CounterRng rng(seed);
  std::normal_distribution<double> normal;
  Matrix a(d, M);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < M; ++j) a(i, j) = normal(rng);
  return orthonormalize_columns(a);
}

/// Runs from the identity start plus `starts` random starts; keeps the largest ρ*,
/// ties going to the earlier start.
inline TraceRatioResult trace_ratio_multistart(const Matrix& s_b, const Matrix& s_w, std::size_t M,
                                               std::size_t starts, std::uint64_t seed,
                                               std::size_t workers = default_workers(), double tol = 1e-10,
                                               std::size_t max_iter = 500) {
  std::vector<std::optional<TraceRatioResult>> runs(starts + 1);
  parallel_for(starts + 1, workers, [&](std::size_t i) {
    std::optional<Matrix> a0;
    if (i > 0) a0 = random_orthonormal(s_w.rows(), M, derive_seed(seed, "trace-ratio-start", i - 1));
    runs[i] = trace_ratio_optimize(s_b, s_w, M, tol, max_iter, a0);
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i)
    if (runs[i]->rho_star > runs[best]->rho_star) best = i;
  return *runs[best];
}

/// σ₁²(A) = tr(AᵀS_WA) / tr(AᵀS_BA)
inline double sigma1(const Matrix& a, const Matrix& s_b, const Matrix& s_w) {
  const double den = trace_congruence(a, s_b);
  if (!(den > 0.0)) fail(ErrorKind::degenerate, "tr(AᵀS_BA) is zero");
  return trace_congruence(a, s_w) / den;
}

struct Sigma2Result {
  Matrix A;
  std::vector<double> lambdas;
  double objective = 0.0;  // Σ 1/λ_i = tr(AᵀS_WA)
};

/// min tr(AᵀS_WA) subject to AᵀS_CA = I_M, via a_i = b_i/√λ_i from the top
/// generalized eigenpairs of (S_C, S_W).
inline Sigma2Result sigma2_optimize(const Matrix& s_w, const Matrix& s_c, std::size_t M) {
  const std::size_t d = s_w.rows();
  require(M >= 1 && M <= d, ErrorKind::dimension, "need 1 <= M <= d");
  const EigenDecomposition e = gen_eig_spd(s_c, s_w);
  const double top = std::max(e.values[0], 0.0);
  if (!(e.values[M - 1] > 1e-10 * top && top > 0.0))
    fail(ErrorKind::rank, "S_C has fewer than M nonzero generalized eigenvalues");
  Sigma2Result r{Matrix(d, M), {}, 0.0};
  for (std::size_t i = 0; i < M; ++i) {
    const double lam = e.values[i];
    r.A.set_column(i, e.vectors.column(i) * (1.0 / std::sqrt(lam)));
    r.lambdas.push_back(lam);
    r.objective += 1.0 / lam;
  }
  return r;
}

/// σ̃²(a) = (a, S a) / (a, gap)² with S = C₊ + C₋.
inline double sigma_tilde(const Vector& a, const Matrix& c_plus, const Matrix& c_minus, const Vector& gap) {
  const double proj = dot(a, gap);
  if (proj == 0.0) fail(ErrorKind::degenerate, "scaling vector is orthogonal to the mean gap");
  return quadratic_form(c_plus + c_minus, a) / (proj * proj);
}

struct LdaScaling {
  Vector a_star;
  double sigma_tilde_sq = 0.0;
};

/// ã* = S⁻¹(z₊ - z₋)
inline LdaScaling lda_scaling(const Matrix& c_plus, const Matrix& c_minus, const Vector& z_plus,
                              const Vector& z_minus) {
  const Matrix s = symmetrized(c_plus + c_minus);
  const Vector gap = z_plus - z_minus;
  LdaScaling r;
  r.a_star = solve_spd(s, gap);
  r.sigma_tilde_sq = sigma_tilde(r.a_star, c_plus, c_minus, gap);
  return r;
}

/// Rescaled coordinates: z₊ = 𝟏, z₋ = -𝟏.
inline LdaScaling lda_scaling(const Matrix& c_plus, const Matrix& c_minus) {
  const std::size_t d = c_plus.rows();
  return lda_scaling(c_plus, c_minus, Vector::ones(d), Vector::ones(d) * -1.0);
}

struct TransformResult {
  Matrix A;
  std::string criterion;
  double value = 0.0;
  std::size_t iterations = 0;
  std::vector<double> rho_history;
};

}  // namespace repobs
