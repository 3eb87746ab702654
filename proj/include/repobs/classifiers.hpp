#pragma once

// Decision rules: elementary rules acting on one observation and the
// aggregated rules acting on a batch of t repeated observations.
//
// Every argmax/argmin breaks ties toward the smallest class index.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "repobs/confusion.hpp"
#include "repobs/error.hpp"
#include "repobs/linalg.hpp"
#include "repobs/models.hpp"
#include "repobs/parallel.hpp"
#include "repobs/random.hpp"

namespace repobs {

/// Index of the largest score; the first one wins ties. NaN scores never win.
inline std::size_t argmax_first(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < scores.size(); ++j)
    if (scores[j] > scores[best] || std::isnan(scores[best])) best = j;
  return best;
}

inline std::size_t argmin_first(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < scores.size(); ++j)
    if (scores[j] < scores[best] || std::isnan(scores[best])) best = j;
  return best;
}

using Utility = std::function<double(const Vector&)>;

/// g(x) = argmax_j f^{(j)}(x): the partition into the sets A_j.
struct NominalMlRule {
  std::vector<ClassModel> nominals;
};

/// g(x) = argmin_j ‖x - x_j‖².
struct PrototypeRule {
  std::vector<Vector> prototypes;
};

/// Two-class rule sign((a, z)) on the rescaled observation z. Class index 0
/// carries the label +1 (anchor m_plus), index 1 the label -1 (anchor m_minus).
struct LinearScaledRule {
  Vector a;
  Vector m_plus;
  Vector m_minus;
};

/// g(x) = argmax_j h_j(x).
struct UtilityRule {
  std::vector<Utility> h;
};

using ElementaryClassifier = std::variant<NominalMlRule, PrototypeRule, LinearScaledRule, UtilityRule>;

/// z_i = 2 (x_i - m₊ᵢ)/(m₊ᵢ - m₋ᵢ) + 1, so m₊ ↦ 𝟏 and m₋ ↦ -𝟏.
inline Vector rescale(const Vector& x, const Vector& m_plus, const Vector& m_minus) {
  require(x.size() == m_plus.size() && x.size() == m_minus.size(), ErrorKind::dimension,
          "rescale anchors must match the observation dimension");
  Vector z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double span = m_plus[i] - m_minus[i];
    if (span == 0.0) fail(ErrorKind::degenerate, "feature " + std::to_string(i + 1) + " has equal class means");
    z[i] = 2.0 / span * (x[i] - m_plus[i]) + 1.0;
  }
  return z;
}

/// sign of Σ (a, z_i) over rescaled observations; sign(0) = +1.
inline int classify_linear_scaled(const Vector& a, const std::vector<Vector>& rescaled) {
  require(squared_norm(a) > 0.0, ErrorKind::degenerate, "scaling vector is zero");
  double total = 0.0;
  for (const auto& z : rescaled) total += dot(a, z);
  return total >= 0.0 ? +1 : -1;
}

inline std::size_t linear_label_to_class(int label) { return label > 0 ? 0 : 1; }

inline std::size_t classify_elementary(const ElementaryClassifier& g, const Vector& x) {
  return std::visit(
      [&](const auto& rule) -> std::size_t {
        using R = std::decay_t<decltype(rule)>;
        std::vector<double> scores;
        if constexpr (std::is_same_v<R, NominalMlRule>) {
          for (const auto& f : rule.nominals) scores.push_back(log_density(f, x));
          return argmax_first(scores);
        } else if constexpr (std::is_same_v<R, PrototypeRule>) {
          for (const auto& p : rule.prototypes) scores.push_back(squared_distance(x, p));
          return argmin_first(scores);
        } else if constexpr (std::is_same_v<R, LinearScaledRule>) {
          return linear_label_to_class(classify_linear_scaled(rule.a, {rescale(x, rule.m_plus, rule.m_minus)}));
        } else {
          for (const auto& h : rule.h) scores.push_back(h(x));
          return argmax_first(scores);
        }
      },
      g);
}

inline std::size_t class_count(const ElementaryClassifier& g) {
  return std::visit(
      [](const auto& rule) -> std::size_t {
        using R = std::decay_t<decltype(rule)>;
        if constexpr (std::is_same_v<R, NominalMlRule>) return rule.nominals.size();
        else if constexpr (std::is_same_v<R, PrototypeRule>) return rule.prototypes.size();
        else if constexpr (std::is_same_v<R, LinearScaledRule>) return 2;
        else return rule.h.size();
      },
      g);
}

// ---------------------------------------------------------------------------
// Utility families. Each reproduces one of the aggregated rules below when
// summed over a batch.

inline std::vector<Utility> indicator_utilities(ElementaryClassifier g) {
  const std::size_t M = class_count(g);
  auto shared = std::make_shared<const ElementaryClassifier>(std::move(g));
  std::vector<Utility> h;
  for (std::size_t j = 0; j < M; ++j)
    h.emplace_back([shared, j](const Vector& x) { return classify_elementary(*shared, x) == j ? 1.0 : 0.0; });
  return h;
}

inline std::vector<Utility> log_density_utilities(const std::vector<ClassModel>& nominals) {
  std::vector<Utility> h;
  for (const auto& f : nominals) h.emplace_back([f](const Vector& x) { return log_density(f, x); });
  return h;
}

inline std::vector<Utility> neg_sq_distance_utilities(const std::vector<Vector>& prototypes) {
  std::vector<Utility> h;
  for (const auto& p : prototypes) h.emplace_back([p](const Vector& x) { return -squared_distance(x, p); });
  return h;
}

// ---------------------------------------------------------------------------
// Aggregated rules.

inline std::size_t classify_majority(const ElementaryClassifier& g, const ObservationBatch& batch) {
  require(batch.t() >= 1, ErrorKind::config, "empty batch");
  std::vector<double> votes(class_count(g), 0.0);
  for (const auto& v : batch.observations) votes[classify_elementary(g, v)] += 1.0;
  return argmax_first(votes);
}

/// argmax_j Σ_i log f_j(V_i); classes scoring -∞ are excluded.
inline std::size_t classify_ml(const std::vector<ClassModel>& nominals, const ObservationBatch& batch) {
  require(batch.t() >= 1, ErrorKind::config, "empty batch");
  std::vector<double> score(nominals.size(), 0.0);
  for (const auto& v : batch.observations)
    for (std::size_t j = 0; j < nominals.size(); ++j) score[j] += log_density(nominals[j], v);
  bool any_finite = false;
  for (double s : score) any_finite = any_finite || s > -kInf;
  if (!any_finite) fail(ErrorKind::degenerate, "every class has zero likelihood on the batch");
  return argmax_first(score);
}

inline std::size_t classify_utility(const std::vector<Utility>& h, const ObservationBatch& batch) {
  require(batch.t() >= 1, ErrorKind::config, "empty batch");
  std::vector<double> score(h.size(), 0.0);
  for (const auto& v : batch.observations)
    for (std::size_t j = 0; j < h.size(); ++j) score[j] += h[j](v);
  bool any_candidate = false;
  for (std::size_t j = 0; j < score.size(); ++j) {
    if (std::isnan(score[j]))
      fail(ErrorKind::degenerate, "utility sum for class " + std::to_string(j + 1) + " is undefined");
    any_candidate = any_candidate || score[j] > -kInf;
  }
  if (!any_candidate) fail(ErrorKind::degenerate, "every utility sum is -inf");
  return argmax_first(score);
}

inline std::size_t classify_prototype(const std::vector<Vector>& prototypes, const ObservationBatch& batch) {
  require(batch.t() >= 1, ErrorKind::config, "empty batch");
  std::vector<double> cost(prototypes.size(), 0.0);
  for (const auto& v : batch.observations)
    for (std::size_t j = 0; j < prototypes.size(); ++j) cost[j] += squared_distance(v, prototypes[j]);
  return argmin_first(cost);
}

inline bool full_column_rank(const Matrix& a) { return numerical_rank(a) == a.cols(); }

/// argmin_j Σ_i ‖Aᵀ(V_i - x_j)‖². Works for rank-deficient A as well; check
/// `full_column_rank` to warn about it.
inline std::size_t classify_prototype_transformed(const Matrix& a, const std::vector<Vector>& prototypes,
                                                  const ObservationBatch& batch) {
  require(batch.t() >= 1, ErrorKind::config, "empty batch");
  std::vector<Vector> projected;
  for (const auto& p : prototypes) projected.push_back(transpose_times(a, p));
  std::vector<double> cost(prototypes.size(), 0.0);
  for (const auto& v : batch.observations) {
    const Vector pv = transpose_times(a, v);
    for (std::size_t j = 0; j < prototypes.size(); ++j) cost[j] += squared_distance(pv, projected[j]);
  }
  return argmin_first(cost);
}

// ---------------------------------------------------------------------------
// Robust rule over the comparison sets A_{i,j} = {x : f^{(i)}(x) > f^{(j)}(x)}.

struct RobustRuleTable {
  std::size_t M = 0;
  /// (i, j) with i < j, in lexicographic order.
  std::vector<std::pair<std::size_t, std::size_t>> sets;
  /// integrals[k][s] estimates ∫_{A_s} f^{(k)} dλ.
  std::vector<std::vector<double>> integrals;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

inline std::vector<std::pair<std::size_t, std::size_t>> comparison_sets(std::size_t M) {
  std::vector<std::pair<std::size_t, std::size_t>> sets;
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = i + 1; j < M; ++j) sets.emplace_back(i, j);
  return sets;
}

namespace detail {

/// Membership of x in each comparison set; density ties fall outside.
inline void set_memberships(const std::vector<ClassModel>& nominals,
                            const std::vector<std::pair<std::size_t, std::size_t>>& sets, const Vector& x,
                            std::vector<double>& logf, std::vector<char>& inside) {
  logf.resize(nominals.size());
  for (std::size_t k = 0; k < nominals.size(); ++k) logf[k] = log_density(nominals[k], x);
  inside.resize(sets.size());
  for (std::size_t s = 0; s < sets.size(); ++s) inside[s] = logf[sets[s].first] > logf[sets[s].second];
}

}  // namespace detail

inline constexpr std::size_t kMonteCarloBlock = 10000;

inline RobustRuleTable build_robust_table(const std::vector<ClassModel>& nominals, std::size_t samples,
                                          std::uint64_t seed, std::size_t workers = 1) {
  const std::size_t M = nominals.size();
  require(M >= 2, ErrorKind::config, "robust rule needs at least two classes");
  require(samples >= 1, ErrorKind::config, "robust table needs samples");
  RobustRuleTable table;
  table.M = M;
  table.sets = comparison_sets(M);
  table.samples = samples;
  table.seed = seed;

  const std::size_t blocks = (samples + kMonteCarloBlock - 1) / kMonteCarloBlock;
  std::vector<std::vector<std::uint64_t>> counts(M * blocks, std::vector<std::uint64_t>(table.sets.size(), 0));
  parallel_for(M * blocks, workers, [&](std::size_t task) {
    const std::size_t k = task / blocks;
    const std::size_t b = task % blocks;
    const std::size_t n = std::min(kMonteCarloBlock, samples - b * kMonteCarloBlock);
    CounterRng rng(derive_seed(seed, "robust-table", task));
    std::vector<double> logf;
    std::vector<char> inside;
    for (std::size_t i = 0; i < n; ++i) {
      detail::set_memberships(nominals, table.sets, sample(nominals[k], rng), logf, inside);
      for (std::size_t s = 0; s < inside.size(); ++s) counts[task][s] += inside[s];
    }
  });

  table.integrals.assign(M, std::vector<double>(table.sets.size(), 0.0));
  for (std::size_t k = 0; k < M; ++k)
    for (std::size_t s = 0; s < table.sets.size(); ++s) {
      std::uint64_t total = 0;
      for (std::size_t b = 0; b < blocks; ++b) total += counts[k * blocks + b][s];
      table.integrals[k][s] = static_cast<double>(total) / static_cast<double>(samples);
    }
  return table;
}

/// Per-class discrepancy max_A |∫_A f^{(i)} - μ_t(A)|.
inline std::vector<double> robust_discrepancies(const RobustRuleTable& table,
                                                const std::vector<ClassModel>& nominals,
                                                const ObservationBatch& batch) {
  require(table.M == nominals.size(), ErrorKind::config, "robust table was built for another problem");
  require(batch.t() >= 1, ErrorKind::config, "empty batch");
  std::vector<double> empirical(table.sets.size(), 0.0);
  std::vector<double> logf;
  std::vector<char> inside;
  for (const auto& v : batch.observations) {
    detail::set_memberships(nominals, table.sets, v, logf, inside);
    for (std::size_t s = 0; s < inside.size(); ++s) empirical[s] += inside[s];
  }
  for (auto& e : empirical) e /= static_cast<double>(batch.t());

  std::vector<double> discrepancy(table.M, 0.0);
  for (std::size_t i = 0; i < table.M; ++i)
    for (std::size_t s = 0; s < table.sets.size(); ++s)
      discrepancy[i] = std::max(discrepancy[i], std::abs(table.integrals[i][s] - empirical[s]));
  return discrepancy;
}

inline std::size_t classify_robust(const RobustRuleTable& table, const std::vector<ClassModel>& nominals,
                                   const ObservationBatch& batch) {
  return argmin_first(robust_discrepancies(table, nominals, batch));
}

// ---------------------------------------------------------------------------
// Batch classifier descriptor used by the simulation harness.

struct MajorityVote {
  ElementaryClassifier g;
};
struct MaximumLikelihood {
  std::vector<ClassModel> nominals;
};
struct UtilitySum {
  std::vector<Utility> h;
};
struct RobustRule {
  RobustRuleTable table;
  std::vector<ClassModel> nominals;
};
struct PrototypeSum {
  std::vector<Vector> prototypes;
};
struct TransformedPrototypeSum {
  Matrix a;
  std::vector<Vector> prototypes;
};
struct LinearScaledSum {
  Vector a;
  Vector m_plus;
  Vector m_minus;
};

using BatchClassifier = std::variant<MajorityVote, MaximumLikelihood, UtilitySum, RobustRule, PrototypeSum,
                                     TransformedPrototypeSum, LinearScaledSum>;

inline std::size_t decide(const BatchClassifier& classifier, const ObservationBatch& batch) {
  return std::visit(
      [&](const auto& c) -> std::size_t {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, MajorityVote>) return classify_majority(c.g, batch);
        else if constexpr (std::is_same_v<C, MaximumLikelihood>) return classify_ml(c.nominals, batch);
        else if constexpr (std::is_same_v<C, UtilitySum>) return classify_utility(c.h, batch);
        else if constexpr (std::is_same_v<C, RobustRule>) return classify_robust(c.table, c.nominals, batch);
        else if constexpr (std::is_same_v<C, PrototypeSum>) return classify_prototype(c.prototypes, batch);
        else if constexpr (std::is_same_v<C, TransformedPrototypeSum>)
          return classify_prototype_transformed(c.a, c.prototypes, batch);
        else {
          std::vector<Vector> rescaled;
          rescaled.reserve(batch.t());
          for (const auto& v : batch.observations) rescaled.push_back(rescale(v, c.m_plus, c.m_minus));
          return linear_label_to_class(classify_linear_scaled(c.a, rescaled));
        }
      },
      classifier);
}

// ---------------------------------------------------------------------------
// Confusion probabilities of an elementary rule.

namespace detail {

/// Normalizes counts; the largest entry absorbs rounding so the row sums to 1.
inline std::vector<double> normalize_counts(const std::vector<std::uint64_t>& counts) {
  std::uint64_t n = 0;
  for (auto c : counts) n += c;
  std::vector<double> row(counts.size());
  std::size_t largest = 0;
  for (std::size_t l = 0; l < counts.size(); ++l) {
    row[l] = static_cast<double>(counts[l]) / static_cast<double>(n);
    if (counts[l] > counts[largest]) largest = l;
  }
  double rest = 0.0;
  for (std::size_t l = 0; l < row.size(); ++l)
    if (l != largest) rest += row[l];
  row[largest] = 1.0 - rest;
  return row;
}

}  // namespace detail

/// Monte Carlo estimate of p(j, l) from n draws per class.
inline ConfusionMatrix confusion_matrix(const Problem& problem, const ElementaryClassifier& g, std::size_t n,
                                        std::uint64_t seed, std::size_t workers = 1) {
  require(n >= 10000, ErrorKind::config, "confusion estimate needs at least 10^4 samples per class");
  const std::size_t M = problem.M();
  require(class_count(g) == M, ErrorKind::dimension, "classifier and problem disagree on the class count");
  const std::size_t blocks = (n + kMonteCarloBlock - 1) / kMonteCarloBlock;
  std::vector<std::vector<std::uint64_t>> counts(M * blocks, std::vector<std::uint64_t>(M, 0));
  parallel_for(M * blocks, workers, [&](std::size_t task) {
    const std::size_t j = task / blocks;
    const std::size_t b = task % blocks;
    const std::size_t m = std::min(kMonteCarloBlock, n - b * kMonteCarloBlock);
    CounterRng rng(derive_seed(seed, "confusion", task));
    for (std::size_t i = 0; i < m; ++i) ++counts[task][classify_elementary(g, sample(problem.classes[j], rng))];
  });
  std::vector<std::vector<double>> rows;
  for (std::size_t j = 0; j < M; ++j) {
    std::vector<std::uint64_t> total(M, 0);
    for (std::size_t b = 0; b < blocks; ++b)
      for (std::size_t l = 0; l < M; ++l) total[l] += counts[j * blocks + b][l];
    rows.push_back(detail::normalize_counts(total));
  }
  return ConfusionMatrix(std::move(rows));
}

/// Exact confusion probabilities when every class is discrete.
inline ConfusionMatrix exact_confusion(const Problem& problem, const ElementaryClassifier& g) {
  const std::size_t M = problem.M();
  require(class_count(g) == M, ErrorKind::dimension, "classifier and problem disagree on the class count");
  std::vector<std::vector<double>> rows;
  for (const auto& c : problem.classes) {
    const auto* dc = std::get_if<DiscreteClass>(&c);
    require(dc != nullptr, ErrorKind::unsupported, "exact confusion needs discrete classes");
    std::vector<double> row(M, 0.0);
    for (std::size_t i = 0; i < dc->support().size(); ++i)
      row[classify_elementary(g, dc->support()[i])] += dc->pmf()[i];
    double rest = 0.0;
    const std::size_t largest = argmax_first(row);
    for (std::size_t l = 0; l < M; ++l)
      if (l != largest) rest += row[l];
    row[largest] = 1.0 - rest;
    rows.push_back(std::move(row));
  }
  return ConfusionMatrix(std::move(rows));
}

}  // namespace repobs
