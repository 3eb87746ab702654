#pragma once

// Class-conditional distributions: Gaussian (Lebesgue dominating measure) and
// finitely supported (counting measure). Sampling, densities and the
// divergences that drive the error exponents.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "repobs/error.hpp"
#include "repobs/linalg.hpp"
#include "repobs/random.hpp"

namespace repobs {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Standard normal distribution function.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

class GaussianClass {
 public:
  GaussianClass(Vector mean, Matrix covariance) : mean_(std::move(mean)) {
    require(!mean_.empty(), ErrorKind::dimension, "empty mean");
    require(is_finite(mean_), ErrorKind::config, "non-finite mean");
    require(covariance.rows() == mean_.size() && covariance.square(), ErrorKind::dimension,
            "covariance shape does not match mean");
    require(is_finite(covariance), ErrorKind::config, "non-finite covariance");
    covariance_ = symmetrized(covariance);
    chol_ = cholesky(covariance_);
    log_det_ = log_det_from_cholesky(chol_);
  }

  static GaussianClass isotropic(Vector mean, double variance = 1.0) {
    const std::size_t d = mean.size();
    return GaussianClass(std::move(mean), Matrix::identity(d) * variance);
  }

  std::size_t dim() const noexcept { return mean_.size(); }
  const Vector& mean() const noexcept { return mean_; }
  const Matrix& covariance() const noexcept { return covariance_; }
  const Matrix& cholesky_factor() const noexcept { return chol_; }
  double log_det() const noexcept { return log_det_; }

  /// (x-μ)ᵀ Σ⁻¹ (x-μ)
  double mahalanobis_sq(const Vector& x) const {
    const Vector y = forward_substitute(chol_, x - mean_);
    return squared_norm(y);
  }

  double log_density(const Vector& x) const {
    require(x.size() == dim(), ErrorKind::dimension, "observation dimension");
    return -0.5 * (static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi) + log_det_ +
                   mahalanobis_sq(x));
  }

  template <class Rng>
  Vector sample(Rng& rng) const {
    std::normal_distribution<double> normal;
    Vector z(dim());
    for (auto& v : z) v = normal(rng);
    Vector x = mean_;
    for (std::size_t i = 0; i < dim(); ++i)
      for (std::size_t k = 0; k <= i; ++k) x[i] += chol_(i, k) * z[k];
    return x;
  }

 private:
  Vector mean_;
  Matrix covariance_;
  Matrix chol_;
  double log_det_ = 0.0;
};

class DiscreteClass {
 public:
  DiscreteClass(std::vector<Vector> support, std::vector<double> pmf)
      : support_(std::move(support)), pmf_(std::move(pmf)) {
    require(!support_.empty(), ErrorKind::config, "empty support");
    require(support_.size() == pmf_.size(), ErrorKind::config, "support and pmf lengths differ");
    const std::size_t d = support_.front().size();
    require(d >= 1, ErrorKind::dimension, "zero-dimensional support point");
    double total = 0.0;
    for (std::size_t i = 0; i < pmf_.size(); ++i) {
      require(support_[i].size() == d, ErrorKind::dimension, "support points differ in dimension");
      require(pmf_[i] >= 0.0 && std::isfinite(pmf_[i]), ErrorKind::config, "pmf entries must be >= 0");
      total += pmf_[i];
      for (std::size_t k = 0; k < i; ++k)
        require(!(support_[k] == support_[i]), ErrorKind::config, "support points must be distinct");
    }
    require(std::abs(total - 1.0) <= 1e-12, ErrorKind::config, "pmf must sum to 1");
    cumulative_.resize(pmf_.size());
    std::partial_sum(pmf_.begin(), pmf_.end(), cumulative_.begin());
  }

  std::size_t dim() const noexcept { return support_.front().size(); }
  const std::vector<Vector>& support() const noexcept { return support_; }
  const std::vector<double>& pmf() const noexcept { return pmf_; }

  std::optional<std::size_t> find(const Vector& x) const {
    for (std::size_t i = 0; i < support_.size(); ++i)
      if (support_[i] == x) return i;
    return std::nullopt;
  }

  double probability(const Vector& x) const {
    require(x.size() == dim(), ErrorKind::dimension, "observation dimension");
    const auto i = find(x);
    return i ? pmf_[*i] : 0.0;
  }

  double log_density(const Vector& x) const {
    const double p = probability(x);
    return p > 0.0 ? std::log(p) : -kInf;
  }

  template <class Rng>
  Vector sample(Rng& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    std::size_t i = static_cast<std::size_t>(it - cumulative_.begin());
    if (i >= pmf_.size()) i = pmf_.size() - 1;
    while (pmf_[i] == 0.0 && i > 0) --i;  // u landed exactly on a boundary of a zero-mass atom
    return support_[i];
  }

  Vector mean() const {
    Vector m(dim());
    for (std::size_t i = 0; i < support_.size(); ++i) m += pmf_[i] * support_[i];
    return m;
  }

  Matrix covariance() const {
    const Vector m = mean();
    Matrix c(dim(), dim());
    for (std::size_t i = 0; i < support_.size(); ++i) {
      const Vector dx = support_[i] - m;
      c += pmf_[i] * Matrix::outer(dx, dx);
    }
    return c;
  }

 private:
  std::vector<Vector> support_;
  std::vector<double> pmf_;
  std::vector<double> cumulative_;
};

using ClassModel = std::variant<GaussianClass, DiscreteClass>;

inline std::size_t dim(const ClassModel& m) {
  return std::visit([](const auto& c) { return c.dim(); }, m);
}

inline double log_density(const ClassModel& m, const Vector& x) {
  return std::visit([&](const auto& c) { return c.log_density(x); }, m);
}

inline double density(const ClassModel& m, const Vector& x) { return std::exp(log_density(m, x)); }

template <class Rng>
Vector sample(const ClassModel& m, Rng& rng) {
  return std::visit([&](const auto& c) { return c.sample(rng); }, m);
}

inline Vector class_mean(const ClassModel& m) {
  return std::visit([](const auto& c) -> Vector { return c.mean(); }, m);
}

inline Matrix class_covariance(const ClassModel& m) {
  return std::visit([](const auto& c) -> Matrix { return c.covariance(); }, m);
}

/// Labels are zero-based: class j of an M-class problem is index j-1 of the
/// one-based notation used in reports.
struct Problem {
  std::size_t d = 0;
  std::vector<ClassModel> classes;
  std::vector<double> priors;
  std::optional<std::vector<Vector>> prototypes;

  std::size_t M() const noexcept { return classes.size(); }

  void validate() const {
    require(M() >= 2, ErrorKind::config, "need at least two classes");
    require(d >= 1, ErrorKind::config, "dimension must be positive");
    for (const auto& c : classes) require(dim(c) == d, ErrorKind::dimension, "class dimension differs from d");
    require(priors.size() == M(), ErrorKind::config, "one prior per class required");
    double total = 0.0;
    for (double p : priors) {
      require(p >= 0.0, ErrorKind::config, "negative prior");
      total += p;
    }
    require(std::abs(total - 1.0) <= 1e-9, ErrorKind::config, "priors must sum to 1");
    if (prototypes) {
      require(prototypes->size() == M(), ErrorKind::config, "one prototype per class required");
      for (const auto& x : *prototypes) require(x.size() == d, ErrorKind::dimension, "prototype dimension");
    }
  }

  /// Explicit prototypes when given, otherwise the class means.
  std::vector<Vector> prototypes_or_means() const {
    if (prototypes) return *prototypes;
    std::vector<Vector> means;
    for (const auto& c : classes) means.push_back(class_mean(c));
    return means;
  }

  std::vector<Matrix> covariances() const {
    std::vector<Matrix> out;
    for (const auto& c : classes) out.push_back(class_covariance(c));
    return out;
  }
};

inline Problem make_problem(std::vector<ClassModel> classes, std::vector<double> priors = {}) {
  Problem p;
  p.d = classes.empty() ? 0 : dim(classes.front());
  if (priors.empty()) priors.assign(classes.size(), 1.0 / static_cast<double>(classes.size()));
  p.classes = std::move(classes);
  p.priors = std::move(priors);
  p.validate();
  return p;
}

struct ObservationBatch {
  std::vector<Vector> observations;

  std::size_t t() const noexcept { return observations.size(); }
};

template <class Rng>
ObservationBatch sample_batch(const Problem& problem, std::size_t label, std::size_t t, Rng& rng) {
  require(label < problem.M(), ErrorKind::config, "label out of range");
  require(t >= 1, ErrorKind::config, "batch size must be positive");
  ObservationBatch batch;
  batch.observations.reserve(t);
  for (std::size_t i = 0; i < t; ++i) batch.observations.push_back(sample(problem.classes[label], rng));
  return batch;
}

namespace detail {

inline void require_same_dim(const ClassModel& a, const ClassModel& b) {
  require(dim(a) == dim(b), ErrorKind::dimension, "class models differ in dimension");
}

[[noreturn]] inline void mixed_families() {
  fail(ErrorKind::unsupported, "divergence between a Gaussian and a discrete class");
}

}  // namespace detail

/// -ln ∫ √(f_a f_b) dλ
inline double bhattacharyya(const ClassModel& a, const ClassModel& b) {
  detail::require_same_dim(a, b);
  if (const auto* ga = std::get_if<GaussianClass>(&a)) {
    const auto* gb = std::get_if<GaussianClass>(&b);
    if (!gb) detail::mixed_families();
    const Matrix avg = 0.5 * (ga->covariance() + gb->covariance());
    const Matrix l = cholesky(avg);
    const Vector diff = ga->mean() - gb->mean();
    const double maha = squared_norm(forward_substitute(l, diff));
    return 0.125 * maha + 0.5 * (log_det_from_cholesky(l) - 0.5 * (ga->log_det() + gb->log_det()));
  }
  const auto& da = std::get<DiscreteClass>(a);
  const auto* db = std::get_if<DiscreteClass>(&b);
  if (!db) detail::mixed_families();
  double overlap = 0.0;
  for (std::size_t i = 0; i < da.support().size(); ++i)
    overlap += std::sqrt(da.pmf()[i] * db->probability(da.support()[i]));
  if (overlap <= 0.0) return kInf;
  return std::max(0.0, -std::log(overlap));
}

/// KL(a‖b). A discrete a with mass outside supp(b) yields +∞.
inline double kl_divergence(const ClassModel& a, const ClassModel& b) {
  detail::require_same_dim(a, b);
  if (const auto* ga = std::get_if<GaussianClass>(&a)) {
    const auto* gb = std::get_if<GaussianClass>(&b);
    if (!gb) detail::mixed_families();
    const std::size_t d = ga->dim();
    const Matrix& lb = gb->cholesky_factor();
    double tr = 0.0;  // tr(Σ_b⁻¹ Σ_a)
    for (std::size_t j = 0; j < d; ++j) tr += cholesky_solve(lb, ga->covariance().column(j))[j];
    const double maha = gb->mahalanobis_sq(ga->mean());
    return std::max(0.0, 0.5 * (tr + maha - static_cast<double>(d) + gb->log_det() - ga->log_det()));
  }
  const auto& da = std::get<DiscreteClass>(a);
  const auto* db = std::get_if<DiscreteClass>(&b);
  if (!db) detail::mixed_families();
  double kl = 0.0;
  for (std::size_t i = 0; i < da.support().size(); ++i) {
    const double p = da.pmf()[i];
    if (p == 0.0) continue;
    const double q = db->probability(da.support()[i]);
    if (q == 0.0) return kInf;
    kl += p * std::log(p / q);
  }
  return std::max(0.0, kl);
}

/// L1 distance ∫|f_a - f_b| dλ. Exact for discrete pairs and for Gaussian
/// pairs sharing a covariance; other Gaussian pairs are estimated by Monte
/// Carlo with `samples` draws from a.
inline double l1_distance(const ClassModel& a, const ClassModel& b, std::uint64_t seed = 0,
                          std::size_t samples = 200000) {
  detail::require_same_dim(a, b);
  if (const auto* ga = std::get_if<GaussianClass>(&a)) {
    const auto* gb = std::get_if<GaussianClass>(&b);
    if (!gb) detail::mixed_families();
    const Matrix diff = ga->covariance() - gb->covariance();
    if (diff.max_abs() <= 1e-12 * std::max(1.0, ga->covariance().max_abs())) {
      const double delta = std::sqrt(ga->mahalanobis_sq(gb->mean()));
      return 2.0 * (2.0 * normal_cdf(0.5 * delta) - 1.0);
    }
    // ∫|f_a - f_b| = E_a |1 - f_b/f_a|
    CounterRng rng(derive_seed(seed, "l1-distance"));
    double total = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector x = ga->sample(rng);
      total += std::abs(1.0 - std::exp(gb->log_density(x) - ga->log_density(x)));
    }
    return total / static_cast<double>(samples);
  }
  const auto& da = std::get<DiscreteClass>(a);
  const auto* db = std::get_if<DiscreteClass>(&b);
  if (!db) detail::mixed_families();
  double total = 0.0;
  for (std::size_t i = 0; i < da.support().size(); ++i)
    total += std::abs(da.pmf()[i] - db->probability(da.support()[i]));
  for (std::size_t i = 0; i < db->support().size(); ++i)
    if (!da.find(db->support()[i])) total += db->pmf()[i];
  return total;
}

/// Δ_j = ½ min_{i≠j} ‖f_i - f_j‖ for each class.
inline std::vector<double> separation_radii(const Problem& problem, std::uint64_t seed = 0) {
  const std::size_t M = problem.M();
  std::vector<double> radii(M, kInf);
  for (std::size_t j = 0; j < M; ++j)
    for (std::size_t i = 0; i < M; ++i)
      if (i != j)
        radii[j] = std::min(radii[j], 0.5 * l1_distance(problem.classes[j], problem.classes[i], seed));
  return radii;
}

}  // namespace repobs
