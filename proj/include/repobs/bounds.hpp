#pragma once

// Closed-form error bounds and CLT approximations for the aggregated rules.
// Strict bounds are upper bounds on max_j P{error | Y = j}; the CLT forms are
// approximations and are labelled as such in every report.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "repobs/confusion.hpp"
#include "repobs/error.hpp"
#include "repobs/linalg.hpp"
#include "repobs/models.hpp"

namespace repobs {

/// value ≈ C·e^{-exponent·t}
struct ExponentialBound {
  double value = 0.0;
  double exponent = 0.0;
};

namespace detail {

inline std::string pair_name(std::size_t j, std::size_t l) {
  return "(j=" + std::to_string(j + 1) + ", l=" + std::to_string(l + 1) + ")";
}

/// 1 - (√a - √b)²
inline double bhattacharyya_coefficient(double a, double b) {
  const double r = std::sqrt(a) - std::sqrt(b);
  return 1.0 - r * r;
}

}  // namespace detail

// --- ML rule ---------------------------------------------------------------

inline double min_pairwise_bhattacharyya(const std::vector<ClassModel>& nominals) {
  double best = kInf;
  for (std::size_t j = 0; j < nominals.size(); ++j)
    for (std::size_t l = 0; l < nominals.size(); ++l)
      if (l != j) best = std::min(best, bhattacharyya(nominals[j], nominals[l]));
  return best;
}

/// (M-1)·exp(-t·min_{l≠j} B(f_j, f_l)); exponent min B (+∞ when every pair is disjoint).
inline ExponentialBound ml_bound(const std::vector<ClassModel>& nominals, double t) {
  require(nominals.size() >= 2, ErrorKind::config, "need at least two classes");
  const double b = min_pairwise_bhattacharyya(nominals);
  const double m1 = static_cast<double>(nominals.size() - 1);
  if (std::isinf(b)) return {0.0, kInf};
  return {m1 * std::exp(-t * b), b};
}

// --- Majority vote ---------------------------------------------------------

/// Throws a margin error naming the first (j, l) with p(j,j) <= p(j,l).
inline void check_majority_margin(const ConfusionMatrix& p) {
  for (std::size_t j = 0; j < p.M(); ++j)
    for (std::size_t l = 0; l < p.M(); ++l)
      if (l != j && !(p(j, j) > p(j, l)))
        fail(ErrorKind::margin, "p(j,j) must exceed p(j,l) at " + detail::pair_name(j, l));
}

/// max_j Σ_{l≠j} (1 - (√p_jj - √p_jl)²)^t
inline double theorem1_bound(const ConfusionMatrix& p, double t) {
  check_majority_margin(p);
  double worst = 0.0;
  for (std::size_t j = 0; j < p.M(); ++j) {
    double sum = 0.0;
    for (std::size_t l = 0; l < p.M(); ++l)
      if (l != j) sum += std::pow(detail::bhattacharyya_coefficient(p(j, j), p(j, l)), t);
    worst = std::max(worst, sum);
  }
  return worst;
}

/// lim (1/t) ln P{error} = max_{j≠l} ln(1 - (√p_jj - √p_jl)²); -∞ for a perfect rule.
inline double sanov_exponent(const ConfusionMatrix& p) {
  check_majority_margin(p);
  double best = -kInf;
  for (std::size_t j = 0; j < p.M(); ++j)
    for (std::size_t l = 0; l < p.M(); ++l)
      if (l != j) best = std::max(best, std::log(detail::bhattacharyya_coefficient(p(j, j), p(j, l))));
  return best;
}

/// (2√(p(1-p)))^t for a diagonal probability p > 1/2.
inline double binary_bound(double p_jj, double t) {
  if (!(p_jj > 0.5)) fail(ErrorKind::margin, "diagonal probability must exceed 1/2");
  return std::pow(2.0 * std::sqrt(p_jj * (1.0 - p_jj)), t);
}

/// max over classes of the single-class form.
inline double binary_bound(const ConfusionMatrix& p, double t) {
  double worst = 0.0;
  for (std::size_t j = 0; j < p.M(); ++j) {
    if (!(p(j, j) > 0.5))
      fail(ErrorKind::margin, "p(j,j) must exceed 1/2 at j=" + std::to_string(j + 1));
    worst = std::max(worst, binary_bound(p(j, j), t));
  }
  return worst;
}

/// Var(1{g=l} - 1{g=j} | Y=j) for the trinomial vote increment.
inline double vote_difference_variance(double p_jj, double p_jl) {
  return p_jl + p_jj - (p_jl - p_jj) * (p_jl - p_jj);
}

/// Φ(-√t (p_jj - p_jl)/σ)
inline double clt_majority(double p_jj, double p_jl, double t) {
  require(p_jj >= 0.0 && p_jl >= 0.0 && p_jj + p_jl <= 1.0 + 1e-12, ErrorKind::config,
          "vote probabilities out of range");
  const double gap = p_jj - p_jl;
  const double var = vote_difference_variance(p_jj, p_jl);
  if (var <= 0.0) {
    if (gap == 0.0) fail(ErrorKind::degenerate, "zero variance and zero gap");
    return gap > 0.0 ? 0.0 : 1.0;
  }
  return normal_cdf(-std::sqrt(t) * gap / std::sqrt(var));
}

// --- Utility aggregation ---------------------------------------------------

/// Moments of the utilities under each class: q(j,l) = E{h_l(V) | Y=j} and
/// var(j,l) = Var(h_l(V) - h_j(V) | Y=j).
struct UtilityMoments {
  std::vector<std::vector<double>> q;
  std::vector<std::vector<double>> variances;
  std::optional<double> K;   // sup |h_j|
  std::optional<double> c1;  // E|h|^k <= c1^k k!

  std::size_t M() const noexcept { return q.size(); }

  /// min_{l≠j} (q_jj - q_jl)
  double delta() const {
    double d = kInf;
    for (std::size_t j = 0; j < M(); ++j)
      for (std::size_t l = 0; l < M(); ++l)
        if (l != j) d = std::min(d, q[j][j] - q[j][l]);
    return d;
  }

  /// Indicator utilities h_j = 1{g = j}: q = p, |h| <= 1, and E|h|^k <= 1 <= k!.
  static UtilityMoments from_confusion(const ConfusionMatrix& p) {
    UtilityMoments m;
    m.q = p.rows();
    m.variances.assign(p.M(), std::vector<double>(p.M(), 0.0));
    for (std::size_t j = 0; j < p.M(); ++j)
      for (std::size_t l = 0; l < p.M(); ++l)
        if (l != j) m.variances[j][l] = vote_difference_variance(p(j, j), p(j, l));
    m.K = 1.0;
    m.c1 = 1.0;
    return m;
  }

  /// Negative squared distances h_j(x) = -‖x - x_j‖² under classes with the
  /// given means and covariances.
  static UtilityMoments prototype(const std::vector<Vector>& means, const std::vector<Matrix>& covariances,
                                  const std::vector<Vector>& prototypes) {
    const std::size_t M = means.size();
    require(covariances.size() == M && prototypes.size() == M, ErrorKind::dimension,
            "one mean, covariance and prototype per class");
    UtilityMoments m;
    m.q.assign(M, std::vector<double>(M, 0.0));
    m.variances.assign(M, std::vector<double>(M, 0.0));
    for (std::size_t j = 0; j < M; ++j)
      for (std::size_t l = 0; l < M; ++l) {
        m.q[j][l] = -(trace(covariances[j]) + squared_distance(means[j], prototypes[l]));
        if (l != j) m.variances[j][l] = 4.0 * quadratic_form(covariances[j], prototypes[l] - prototypes[j]);
      }
    return m;
  }
};

/// (M-1)·exp(-t δ²/(2K²)); exponent δ²/(2K²).
inline ExponentialBound hoeffding_bound(const UtilityMoments& moments, double t) {
  if (!moments.K) fail(ErrorKind::unsupported, "Hoeffding bound needs the utility bound K");
  const double K = *moments.K;
  require(K > 0.0 && std::isfinite(K), ErrorKind::config, "K must be positive and finite");
  const double delta = moments.delta();
  if (!(delta > 0.0)) fail(ErrorKind::margin, "utility margin delta must be positive");
  const double exponent = delta * delta / (2.0 * K * K);
  return {static_cast<double>(moments.M() - 1) * std::exp(-t * exponent), exponent};
}

struct MomentBound {
  double value = 0.0;         // (M-1) ρ^t
  double rho = 0.0;
  double neg_log_rho = 0.0;   // -ln ρ
  double middle = 0.0;        // (1 - 2√r)²/(2r), r = c₁/(4c₁+δ)
  double floor = 0.0;         // δ²/(40c₁²)
  double beta = 0.0;          // minimizing Chernoff parameter
};

/// Exponent chain under E|h|^k <= c₁^k k!, valid for 0 < δ <= 2c₁.
inline MomentBound moment_exponents(double delta, double c1) {
  require(c1 > 0.0 && std::isfinite(c1), ErrorKind::config, "c1 must be positive and finite");
  if (!(delta > 0.0)) fail(ErrorKind::margin, "utility margin delta must be positive");
  if (delta > 2.0 * c1) fail(ErrorKind::out_of_regime, "moment bound requires delta <= 2 c1");
  const double r = c1 / (4.0 * c1 + delta);
  const double s = 1.0 - 2.0 * std::sqrt(r);
  MomentBound out;
  out.middle = s * s / (2.0 * r);
  out.rho = 1.0 - out.middle;
  out.neg_log_rho = -std::log(out.rho);
  out.floor = delta * delta / (40.0 * c1 * c1);
  out.beta = s / (2.0 * c1);
  return out;
}

inline MomentBound moment_bound(const UtilityMoments& moments, double t) {
  if (!moments.c1) fail(ErrorKind::unsupported, "moment bound needs the constant c1");
  MomentBound out = moment_exponents(moments.delta(), *moments.c1);
  out.value = static_cast<double>(moments.M() - 1) * std::pow(out.rho, t);
  return out;
}

/// Φ(-√t (q_jj - q_jl)/√Var(h_l - h_j | Y=j))
inline double clt_utility(const UtilityMoments& moments, std::size_t j, std::size_t l, double t) {
  require(j < moments.M() && l < moments.M() && j != l, ErrorKind::config, "invalid class pair");
  const double gap = moments.q[j][j] - moments.q[j][l];
  const double var = moments.variances[j][l];
  if (var <= 0.0) {
    if (gap == 0.0) fail(ErrorKind::degenerate, "zero variance and zero gap at " + detail::pair_name(j, l));
    return gap > 0.0 ? 0.0 : 1.0;
  }
  return normal_cdf(-std::sqrt(t) * gap / std::sqrt(var));
}

// --- Robust rule -----------------------------------------------------------

/// 2M(M-1)² e^{-tε²/2}
inline double dgl_bound(double eps, std::size_t M, double t) {
  require(eps > 0.0, ErrorKind::config, "epsilon must be positive");
  const double m = static_cast<double>(M);
  return 2.0 * m * (m - 1.0) * (m - 1.0) * std::exp(-t * eps * eps / 2.0);
}

// --- Prototype rules -------------------------------------------------------

struct PrototypeBound {
  double tight = 0.0;  // exp(-t‖Δ‖⁴ / (8 ΔᵀCΔ))
  double trace = 0.0;  // exp(-t‖Δ‖² / (8 tr C))
  double tight_exponent = 0.0;
  double trace_exponent = 0.0;
};

inline PrototypeBound prototype_bound(const Vector& x_j, const Vector& x_l, const Matrix& c_j, double t) {
  const Vector gap = x_j - x_l;
  const double g2 = squared_norm(gap);
  if (!(g2 > 0.0)) fail(ErrorKind::degenerate, "coincident prototypes");
  const double spread = quadratic_form(c_j, gap);
  PrototypeBound out;
  out.tight_exponent = spread > 0.0 ? g2 * g2 / (8.0 * spread) : kInf;
  out.trace_exponent = g2 / (8.0 * trace(c_j));
  out.tight = std::exp(-t * out.tight_exponent);
  out.trace = std::exp(-t * out.trace_exponent);
  return out;
}

/// Prototype bound for the transformed observations Aᵀx with covariance AᵀCA.
inline PrototypeBound transformed_bound(const Matrix& a, const Vector& x_j, const Vector& x_l, const Matrix& c_j,
                                        double t) {
  const Vector gap = transpose_times(a, x_j - x_l);
  if (!(squared_norm(gap) > 1e-300))
    fail(ErrorKind::degenerate, "transform annihilates the prototype difference");
  return prototype_bound(gap, Vector(gap.size()), congruence(a, c_j), t);
}

/// σ²(A) = max_{l≠j} tr(AᵀC_jA) / ‖Aᵀ(x_j - x_l)‖²
inline double sigma_of_A(const Matrix& a, const std::vector<Matrix>& covariances,
                         const std::vector<Vector>& prototypes) {
  const std::size_t M = prototypes.size();
  require(covariances.size() == M, ErrorKind::dimension, "one covariance per prototype");
  double worst = 0.0;
  for (std::size_t j = 0; j < M; ++j) {
    const double spread = trace_congruence(a, covariances[j]);
    for (std::size_t l = 0; l < M; ++l) {
      if (l == j) continue;
      const double g2 = squared_norm(transpose_times(a, prototypes[j] - prototypes[l]));
      if (!(g2 > 0.0)) fail(ErrorKind::degenerate, "transformed prototypes coincide at " + detail::pair_name(j, l));
      worst = std::max(worst, spread / g2);
    }
  }
  return worst;
}

/// Aggregate approximation (M-1) e^{-t/(8σ²(A))}.
inline double transformed_aggregate_bound(double sigma_sq, std::size_t M, double t) {
  return static_cast<double>(M - 1) * std::exp(-t / (8.0 * sigma_sq));
}

// --- Linear classification (M = 2) ---------------------------------------

/// 2 e^{-t/(2 max{σ²₋, σ²₊})}
inline ExponentialBound linear_bound(double sigma_minus_sq, double sigma_plus_sq, double t) {
  const double worst = std::max(sigma_minus_sq, sigma_plus_sq);
  if (!(worst > 0.0)) return {0.0, kInf};
  const double exponent = 1.0 / (2.0 * worst);
  return {2.0 * std::exp(-t * exponent), exponent};
}

/// 2 e^{-t/(2σ²(a))}
inline ExponentialBound linear_bound(double sigma_sq, double t) { return linear_bound(sigma_sq, sigma_sq, t); }

/// σ²_{d,±} = Var(Σ Z_i / d) from the covariances of the rescaled vector Z.
inline std::pair<double, double> linear_score_variances(const Matrix& c_minus, const Matrix& c_plus) {
  const double d = static_cast<double>(c_plus.rows());
  const Vector one = Vector::ones(c_plus.rows());
  return {quadratic_form(c_minus, one) / (d * d), quadratic_form(c_plus, one) / (d * d)};
}

/// σ²(a) = max{(a,C₊a), (a,C₋a)} / (a, z₊ - z₋)²
inline double sigma_sq_of_scaling(const Vector& a, const Matrix& c_plus, const Matrix& c_minus, const Vector& gap) {
  const double proj = dot(a, gap);
  if (proj == 0.0) fail(ErrorKind::degenerate, "scaling vector is orthogonal to the mean gap");
  return std::max(quadratic_form(c_plus, a), quadratic_form(c_minus, a)) / (proj * proj);
}

// --- Reports ---------------------------------------------------------------

struct BoundColumn {
  std::string name;
  bool strict = true;              // false for CLT approximations
  std::vector<double> values;      // one per t
  std::vector<double> exponents;   // asymptotic rate, one per t
  std::string note;                // set when a precondition failed; values then empty
};

struct BoundReport {
  std::vector<std::size_t> t_grid;
  std::vector<BoundColumn> columns;
};

}  // namespace repobs
