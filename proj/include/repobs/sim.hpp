#pragma once

// Monte Carlo error estimation over a t-grid, exact majority-vote oracles,
// exponent fitting and bound auditing.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "repobs/bounds.hpp"
#include "repobs/classifiers.hpp"
#include "repobs/confusion.hpp"
#include "repobs/error.hpp"
#include "repobs/models.hpp"
#include "repobs/parallel.hpp"
#include "repobs/random.hpp"

namespace repobs {

inline constexpr double kWilsonZ = 1.959963984540054;

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

inline Interval wilson(std::uint64_t errors, std::uint64_t trials, double z = kWilsonZ) {
  require(trials > 0 && errors <= trials, ErrorKind::config, "invalid counts");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(errors) / n;
  const double z2 = z * z;
  const double den = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / den;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / den;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

/// Binomial standard error √(p̂(1-p̂)/n).
inline double standard_error(double p_hat, std::uint64_t trials) {
  return std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(trials));
}

struct Proportion {
  std::uint64_t trials = 0;
  std::uint64_t errors = 0;
  double p_hat = 0.0;
  Interval ci;

  static Proportion of(std::uint64_t errors, std::uint64_t trials) {
    return {trials, errors, static_cast<double>(errors) / static_cast<double>(trials), wilson(errors, trials)};
  }
};

struct ErrorEstimate {
  std::size_t t = 0;
  std::vector<Proportion> per_class;  // P{ĝ ≠ j | Y = j}
  Proportion pooled;                  // all classes, equal trials each
  double prior_weighted = 0.0;
  double uniform = 0.0;
  double max_over_class = 0.0;
  std::size_t worst_class = 0;
};

/// `trials` batches of size t per class. Blocks of 10⁴ batches draw from
/// streams keyed by (seed, t, class, block), so the worker count never matters.
inline ErrorEstimate estimate_error(const Problem& problem, const BatchClassifier& classifier, std::size_t t,
                                    std::size_t trials, std::uint64_t seed,
                                    std::size_t workers = default_workers()) {
  require(trials >= 100, ErrorKind::config, "need at least 100 trials");
  require(t >= 1, ErrorKind::config, "t must be positive");
  const std::size_t M = problem.M();
  const std::size_t blocks = (trials + kMonteCarloBlock - 1) / kMonteCarloBlock;
  const std::uint64_t key = derive_seed(seed, "estimate", t);
  std::vector<std::uint64_t> errors(M * blocks, 0);
  parallel_for(M * blocks, workers, [&](std::size_t task) {
    const std::size_t j = task / blocks;
    const std::size_t b = task % blocks;
    const std::size_t n = std::min(kMonteCarloBlock, trials - b * kMonteCarloBlock);
    CounterRng rng(derive_seed(key, "block", task));
    std::uint64_t e = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (decide(classifier, sample_batch(problem, j, t, rng)) != j) ++e;
    errors[task] = e;
  });

  ErrorEstimate out;
  out.t = t;
  std::uint64_t total = 0;
  for (std::size_t j = 0; j < M; ++j) {
    std::uint64_t e = 0;
    for (std::size_t b = 0; b < blocks; ++b) e += errors[j * blocks + b];
    total += e;
    out.per_class.push_back(Proportion::of(e, trials));
    const double p = out.per_class.back().p_hat;
    out.prior_weighted += problem.priors[j] * p;
    out.uniform += p / static_cast<double>(M);
    if (p > out.max_over_class) {
      out.max_over_class = p;
      out.worst_class = j;
    }
  }
  out.pooled = Proportion::of(total, static_cast<std::uint64_t>(trials) * M);
  return out;
}

struct SimCurve {
  std::vector<ErrorEstimate> points;
  std::uint64_t seed = 0;
  std::string classifier;

  std::vector<std::size_t> t_grid() const {
    std::vector<std::size_t> ts;
    for (const auto& p : points) ts.push_back(p.t);
    return ts;
  }
};

inline SimCurve sweep_t(const Problem& problem, const BatchClassifier& classifier,
                        const std::vector<std::size_t>& t_grid, std::size_t trials, std::uint64_t seed,
                        std::string descriptor = {}, std::size_t workers = default_workers()) {
  require(!t_grid.empty(), ErrorKind::config, "t grid is empty");
  require(std::is_sorted(t_grid.begin(), t_grid.end()), ErrorKind::config, "t grid must be ascending");
  SimCurve curve{{}, seed, std::move(descriptor)};
  for (std::size_t t : t_grid) curve.points.push_back(estimate_error(problem, classifier, t, trials, seed, workers));
  return curve;
}

// --- Exact majority-vote oracle --------------------------------------------

inline constexpr double kMaxEnumeration = 1e7;

namespace detail {

/// ln(n!/(k_1!…k_M!) Π p_l^{k_l}); -∞ when a zero probability carries votes.
inline double log_multinomial(const std::vector<std::size_t>& k, const std::vector<double>& p) {
  std::size_t n = 0;
  double s = 0.0;
  for (std::size_t l = 0; l < k.size(); ++l) {
    n += k[l];
    if (k[l] == 0) continue;
    if (p[l] <= 0.0) return -kInf;
    s += static_cast<double>(k[l]) * std::log(p[l]) - std::lgamma(static_cast<double>(k[l]) + 1.0);
  }
  return s + std::lgamma(static_cast<double>(n) + 1.0);
}

/// Number of vote compositions C(t+M-1, M-1).
inline double composition_count(std::size_t t, std::size_t M) {
  return std::exp(std::lgamma(static_cast<double>(t + M)) - std::lgamma(static_cast<double>(t) + 1.0) -
                  std::lgamma(static_cast<double>(M)));
}

}  // namespace detail

/// P{g̃ = l | Y = j} for every l, ties going to the smallest index.
inline std::vector<double> exact_majority_distribution(const ConfusionMatrix& p, std::size_t t, std::size_t j) {
  const std::size_t M = p.M();
  require(j < M, ErrorKind::config, "class out of range");
  require(t >= 1, ErrorKind::config, "t must be positive");
  const std::vector<double>& row = p.row(j);
  std::vector<double> out(M, 0.0);
  if (M == 2) {
    for (std::size_t k = 0; k <= t; ++k) {
      const double lp = detail::log_multinomial({k, t - k}, row);
      if (std::isinf(lp)) continue;
      out[k >= t - k ? 0 : 1] += std::exp(lp);
    }
    return out;
  }
  if (detail::composition_count(t, M) > kMaxEnumeration)
    fail(ErrorKind::size_limit, "vote enumeration exceeds 10^7 configurations");
  std::vector<std::size_t> k(M, 0);
  auto visit = [&](auto&& self, std::size_t pos, std::size_t left) -> void {
    if (pos + 1 == M) {
      k[pos] = left;
      const double lp = detail::log_multinomial(k, row);
      if (!std::isinf(lp))
        out[static_cast<std::size_t>(std::max_element(k.begin(), k.end()) - k.begin())] += std::exp(lp);
      return;
    }
    for (std::size_t c = 0; c <= left; ++c) {
      k[pos] = c;
      self(self, pos + 1, left - c);
    }
  };
  visit(visit, 0, t);
  return out;
}

/// P{g̃ ≠ j | Y = j}
inline double exact_majority_error(const ConfusionMatrix& p, std::size_t t, std::size_t j) {
  const std::vector<double> dist = exact_majority_distribution(p, t, j);
  double wrong = 0.0;
  for (std::size_t l = 0; l < dist.size(); ++l)
    if (l != j) wrong += dist[l];
  return wrong;
}

/// max_j P{g̃ ≠ j | Y = j}
inline double exact_majority_worst(const ConfusionMatrix& p, std::size_t t) {
  double worst = 0.0;
  for (std::size_t j = 0; j < p.M(); ++j) worst = std::max(worst, exact_majority_error(p, t, j));
  return worst;
}

// --- Exponent fit ----------------------------------------------------------

struct ExponentFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points_used = 0;
  std::vector<double> excluded_t;  // points with zero estimate
};

/// Least squares of ln y against t over points with y > 0; optional weights.
inline ExponentFit fit_exponent(const std::vector<double>& t, const std::vector<double>& y,
                                const std::vector<double>& weights = {}) {
  require(t.size() == y.size(), ErrorKind::dimension, "t and y differ in length");
  require(weights.empty() || weights.size() == t.size(), ErrorKind::dimension, "one weight per point");
  ExponentFit fit;
  std::vector<double> xs, ls, ws;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (y[i] > 0.0 && w > 0.0) {
      xs.push_back(t[i]);
      ls.push_back(std::log(y[i]));
      ws.push_back(w);
    } else {
      fit.excluded_t.push_back(t[i]);
    }
  }
  fit.points_used = xs.size();
  if (fit.points_used < 3) fail(ErrorKind::insufficient_data, "fewer than 3 points with nonzero error");
  double sw = 0.0, sx = 0.0, sl = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sw += ws[i];
    sx += ws[i] * xs[i];
    sl += ws[i] * ls[i];
  }
  const double mx = sx / sw, ml = sl / sw;
  double sxx = 0.0, sxl = 0.0, sll = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += ws[i] * (xs[i] - mx) * (xs[i] - mx);
    sxl += ws[i] * (xs[i] - mx) * (ls[i] - ml);
    sll += ws[i] * (ls[i] - ml) * (ls[i] - ml);
  }
  if (!(sxx > 0.0)) fail(ErrorKind::insufficient_data, "t values do not vary");
  fit.slope = sxl / sxx;
  fit.intercept = ml - fit.slope * mx;
  double resid = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ls[i] - (fit.intercept + fit.slope * xs[i]);
    resid += ws[i] * r * r;
  }
  fit.r_squared = sll > 0.0 ? 1.0 - resid / sll : 1.0;
  return fit;
}

/// Fit of the pooled estimate; weighted uses inverse variance n p̂/(1-p̂) of ln p̂.
inline ExponentFit fit_exponent(const SimCurve& curve, bool weighted = false) {
  std::vector<double> t, y, w;
  for (const auto& p : curve.points) {
    t.push_back(static_cast<double>(p.t));
    y.push_back(p.pooled.p_hat);
    const double ph = p.pooled.p_hat;
    w.push_back(ph > 0.0 && ph < 1.0 ? static_cast<double>(p.pooled.trials) * ph / (1.0 - ph) : 0.0);
  }
  return fit_exponent(t, y, weighted ? w : std::vector<double>{});
}

// --- Audit -----------------------------------------------------------------

struct AuditRow {
  std::size_t t = 0;
  std::string bound_name;
  double bound_value = 0.0;
  double ci_low = 0.0;    // largest class-conditional Wilson lower bound
  double estimate = 0.0;  // max-over-class estimate
  std::string verdict;    // ok, VIOLATION, APPROX
};

/// A strict bound is violated at t when some class's Wilson lower bound exceeds it.
/// Approximate columns are listed for comparison only.
inline std::vector<AuditRow> audit_bounds(const SimCurve& curve, const BoundReport& report) {
  const std::vector<std::size_t> ts = curve.t_grid();
  if (ts != report.t_grid) fail(ErrorKind::config, "curve and bound report use different t grids");
  std::vector<AuditRow> rows;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const ErrorEstimate& e = curve.points[i];
    double low = 0.0;
    for (const auto& c : e.per_class) low = std::max(low, c.ci.low);
    for (const auto& col : report.columns) {
      if (col.values.empty()) continue;
      AuditRow r{ts[i], col.name, col.values[i], low, e.max_over_class, "ok"};
      if (!col.strict) r.verdict = "APPROX";
      else if (low > col.values[i]) r.verdict = "VIOLATION";
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

inline std::size_t count_violations(const std::vector<AuditRow>& rows) {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [](const AuditRow& r) { return r.verdict == "VIOLATION"; }));
}

}  // namespace repobs
