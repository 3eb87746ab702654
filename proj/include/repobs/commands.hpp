#pragma once

// The four user-facing commands. Each reads a RunConfig, writes its artifacts
// under the output directory and returns the in-memory result.

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "repobs/bounds.hpp"
#include "repobs/classifiers.hpp"
#include "repobs/confusion.hpp"
#include "repobs/error.hpp"
#include "repobs/io.hpp"
#include "repobs/models.hpp"
#include "repobs/parallel.hpp"
#include "repobs/sim.hpp"
#include "repobs/transform.hpp"

namespace repobs {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInsufficientData = 3;
inline constexpr int kExitNumerical = 4;

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::dimension:
    case ErrorKind::unsupported:
    case ErrorKind::size_limit: return kExitConfig;
    case ErrorKind::insufficient_data: return kExitInsufficientData;
    default: return kExitNumerical;
  }
}

/// Strict grammar: "a:b:step" or a comma-separated list of positive integers.
inline std::vector<std::size_t> parse_t_grid(const std::string& spec) {
  auto number = [&](const std::string& s) -> std::size_t {
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
      fail(ErrorKind::config, "bad t-grid spec '" + spec + "'");
    return v;
  };
  std::vector<std::size_t> grid;
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3 || spec.back() == ':') fail(ErrorKind::config, "t-grid range must be a:b:step");
    const std::size_t a = number(parts[0]), b = number(parts[1]), step = number(parts[2]);
    require(step >= 1 && a <= b, ErrorKind::config, "t-grid range needs a <= b and step >= 1");
    for (std::size_t t = a; t <= b; t += step) grid.push_back(t);
  } else {
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ',');) grid.push_back(number(p));
    if (!spec.empty() && spec.back() == ',') fail(ErrorKind::config, "trailing comma in t-grid");
  }
  require(!grid.empty(), ErrorKind::config, "t grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    require(grid[i] >= 1, ErrorKind::config, "t values must be positive");
    require(i == 0 || grid[i] > grid[i - 1], ErrorKind::config, "t grid must be strictly ascending");
  }
  return grid;
}

struct RunConfig {
  std::optional<Problem> problem;
  std::optional<ConfusionMatrix> confusion;
  json classifier = {{"type", "majority"}};
  std::vector<std::size_t> t_grid;
  std::size_t trials = 10000;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  std::vector<std::string> bounds;
  std::vector<std::string> optimizers = {"sigma1", "sigma2"};
  json options = json::object();  // bound and optimizer parameters
  std::filesystem::path base_dir = ".";
  std::size_t workers = default_workers();
};

/// Discrete 1-D classes on {0, …, M-1} whose nearest-point rule has exactly the confusion p.
inline Problem problem_from_confusion(const ConfusionMatrix& p) {
  std::vector<Vector> support;
  for (std::size_t l = 0; l < p.M(); ++l) support.push_back(Vector{static_cast<double>(l)});
  std::vector<ClassModel> classes;
  for (std::size_t j = 0; j < p.M(); ++j) {
    std::vector<Vector> s;
    std::vector<double> w;
    for (std::size_t l = 0; l < p.M(); ++l)
      if (p(j, l) > 0.0) {
        s.push_back(support[l]);
        w.push_back(p(j, l));
      }
    classes.emplace_back(DiscreteClass(std::move(s), std::move(w)));
  }
  Problem problem = make_problem(std::move(classes));
  problem.prototypes = support;
  return problem;
}

inline RunConfig config_from_json(const json& j, const std::filesystem::path& base_dir = ".") {
  RunConfig c;
  c.base_dir = base_dir;
  try {
    require(j.is_object(), ErrorKind::config, "config must be a JSON object");
    if (j.contains("problem")) c.problem = problem_from_json(j.at("problem"));
    if (j.contains("problem_file")) c.problem = problem_from_json(read_json(base_dir / j.at("problem_file").get<std::string>()));
    if (j.contains("confusion"))
      c.confusion = ConfusionMatrix(j.at("confusion").get<std::vector<std::vector<double>>>());
    if (!c.problem && c.confusion) c.problem = problem_from_confusion(*c.confusion);
    require(c.problem.has_value(), ErrorKind::config, "config needs 'problem', 'problem_file' or 'confusion'");
    if (j.contains("classifier")) {
      c.classifier = j.at("classifier");
      if (c.classifier.is_string()) c.classifier = {{"type", c.classifier.get<std::string>()}};
    }
    if (j.contains("t_grid")) {
      const auto& g = j.at("t_grid");
      if (g.is_string()) c.t_grid = parse_t_grid(g.get<std::string>());
      else {
        std::string spec;
        for (const auto& t : g) spec += (spec.empty() ? "" : ",") + std::to_string(t.get<long long>());
        c.t_grid = parse_t_grid(spec);
      }
    }
    c.trials = j.value("trials", c.trials);
    c.seed = j.value("seed", c.seed);
    if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
    if (j.contains("bounds")) c.bounds = j.at("bounds").get<std::vector<std::string>>();
    if (j.contains("optimizers")) c.optimizers = j.at("optimizers").get<std::vector<std::string>>();
    if (j.contains("options")) c.options = j.at("options");
  } catch (const json::exception& e) {
    fail(ErrorKind::config, std::string("malformed config: ") + e.what());
  }
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_json(path), path.parent_path());
}

// --- Classifier descriptors ------------------------------------------------

namespace detail {

inline std::string descriptor_type(const json& d) { return d.value("type", std::string("majority")); }

inline ElementaryClassifier elementary_from(const RunConfig& c, const std::string& kind) {
  const Problem& p = *c.problem;
  if (kind == "ml") return NominalMlRule{p.classes};
  if (kind == "prototype") return PrototypeRule{p.prototypes_or_means()};
  if (kind == "linear") {
    require(p.M() == 2, ErrorKind::config, "the linear rule needs M = 2");
    const Vector a = c.classifier.contains("a") ? vector_from_json(c.classifier.at("a")) : Vector::ones(p.d);
    return LinearScaledRule{a, class_mean(p.classes[0]), class_mean(p.classes[1])};
  }
  fail(ErrorKind::config, "unknown elementary rule '" + kind + "'");
}

inline std::string default_elementary(const RunConfig& c) {
  return c.problem->prototypes ? "prototype" : "ml";
}

inline Matrix transform_from(const RunConfig& c) {
  const json& d = c.classifier;
  if (d.contains("a")) return matrix_from_json(d.at("a"));
  if (d.contains("transform_file")) {
    std::ifstream in(c.base_dir / d.at("transform_file").get<std::string>());
    require(static_cast<bool>(in), ErrorKind::config, "cannot open transform file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_transform(ss.str()).A;
  }
  const std::size_t M = std::min(c.problem->M(), c.problem->d);
  return Matrix::identity(c.problem->d).left_columns(M);
}

inline RobustRuleTable robust_table_for(const RunConfig& c) {
  const json& d = c.classifier;
  if (d.contains("table")) {
    const auto path = c.base_dir / d.at("table").get<std::string>();
    if (std::filesystem::exists(path)) {
      RobustRuleTable t = robust_table_from_json(read_json(path));
      require(t.M == c.problem->M(), ErrorKind::config, "cached robust table has the wrong class count");
      return t;
    }
  }
  const std::size_t samples = d.value("samples", std::size_t{200000});
  const std::uint64_t seed = derive_seed(c.seed, "robust-table-build");
  std::clog << "robust table: building with " << samples << " samples, seed " << seed << "\n";
  RobustRuleTable t = build_robust_table(c.problem->classes, samples, seed, c.workers);
  if (d.contains("table")) write_json(c.base_dir / d.at("table").get<std::string>(), to_json(t));
  return t;
}

}  // namespace detail

inline BatchClassifier make_classifier(const RunConfig& c) {
  const Problem& p = *c.problem;
  const std::string type = detail::descriptor_type(c.classifier);
  if (type == "majority")
    return MajorityVote{detail::elementary_from(c, c.classifier.value("elementary", detail::default_elementary(c)))};
  if (type == "ml") return MaximumLikelihood{p.classes};
  if (type == "prototype") return PrototypeSum{p.prototypes_or_means()};
  if (type == "transformed_prototype") return TransformedPrototypeSum{detail::transform_from(c), p.prototypes_or_means()};
  if (type == "linear") {
    const auto rule = std::get<LinearScaledRule>(detail::elementary_from(c, "linear"));
    return LinearScaledSum{rule.a, rule.m_plus, rule.m_minus};
  }
  if (type == "robust") return RobustRule{detail::robust_table_for(c), p.classes};
  fail(ErrorKind::config, "unknown classifier type '" + type + "'");
}

inline std::string describe(const json& classifier) {
  std::string s = detail::descriptor_type(classifier);
  if (classifier.contains("elementary")) s += ":" + classifier.at("elementary").get<std::string>();
  return s;
}

// --- Bounds ----------------------------------------------------------------

namespace detail {

inline std::string sanitize_note(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

/// Evaluates value(t) over the grid; any library error becomes the column note.
inline BoundColumn make_column(const std::string& name, bool strict, const std::vector<std::size_t>& grid,
                               const std::function<double()>& exponent,
                               const std::function<double(double)>& value) {
  BoundColumn col;
  col.name = name;
  col.strict = strict;
  try {
    const double e = exponent();
    for (std::size_t t : grid) {
      col.values.push_back(value(static_cast<double>(t)));
      col.exponents.push_back(e);
    }
  } catch (const Error& err) {
    col.values.clear();
    col.exponents.clear();
    col.note = sanitize_note(err.what());
  }
  return col;
}

inline bool all_gaussian(const Problem& p) {
  return std::all_of(p.classes.begin(), p.classes.end(),
                     [](const ClassModel& c) { return std::holds_alternative<GaussianClass>(c); });
}

/// max_j Σ_{l≠j} term(j, l)
inline double worst_row_sum(std::size_t M, const std::function<double(std::size_t, std::size_t)>& term) {
  double worst = 0.0;
  for (std::size_t j = 0; j < M; ++j) {
    double s = 0.0;
    for (std::size_t l = 0; l < M; ++l)
      if (l != j) s += term(j, l);
    worst = std::max(worst, s);
  }
  return worst;
}

inline double min_pair(std::size_t M, const std::function<double(std::size_t, std::size_t)>& term) {
  double best = kInf;
  for (std::size_t j = 0; j < M; ++j)
    for (std::size_t l = 0; l < M; ++l)
      if (l != j) best = std::min(best, term(j, l));
  return best;
}

inline double clt_exponent(const UtilityMoments& m) {
  return min_pair(m.M(), [&](std::size_t j, std::size_t l) {
    const double gap = m.q[j][j] - m.q[j][l];
    const double var = m.variances[j][l];
    if (var <= 0.0) return gap > 0.0 ? kInf : 0.0;
    return gap > 0.0 ? gap * gap / (2.0 * var) : 0.0;
  });
}

}  // namespace detail

/// Confusion matrix for the majority family: explicit, exact for discrete classes, else Monte Carlo.
inline ConfusionMatrix resolve_confusion(const RunConfig& c) {
  if (c.confusion) return *c.confusion;
  const ElementaryClassifier g =
      detail::elementary_from(c, c.classifier.value("elementary", detail::default_elementary(c)));
  const bool discrete = std::all_of(c.problem->classes.begin(), c.problem->classes.end(),
                                    [](const ClassModel& m) { return std::holds_alternative<DiscreteClass>(m); });
  if (discrete) return exact_confusion(*c.problem, g);
  const std::size_t n = c.options.value("confusion_samples", std::size_t{100000});
  return confusion_matrix(*c.problem, g, n, derive_seed(c.seed, "confusion-estimate"), c.workers);
}

inline UtilityMoments resolve_moments(const RunConfig& c) {
  const json& o = c.options;
  if (o.contains("utility_moments")) {
    const json& m = o.at("utility_moments");
    UtilityMoments u;
    u.q = m.at("q").get<std::vector<std::vector<double>>>();
    u.variances = m.value("variances", std::vector<std::vector<double>>(u.q.size(), std::vector<double>(u.q.size(), 0.0)));
    if (m.contains("K")) u.K = m.at("K").get<double>();
    if (m.contains("c1")) u.c1 = m.at("c1").get<double>();
    return u;
  }
  if (o.value("utility", std::string("indicator")) == "prototype") {
    std::vector<Vector> means;
    for (const auto& cl : c.problem->classes) means.push_back(class_mean(cl));
    return UtilityMoments::prototype(means, c.problem->covariances(), c.problem->prototypes_or_means());
  }
  return UtilityMoments::from_confusion(resolve_confusion(c));
}

inline const std::vector<std::string>& bound_families() {
  static const std::vector<std::string> f = {"majority", "ml", "utility", "robust", "prototype", "transformed",
                                             "linear"};
  return f;
}

/// Columns of one bound family over the grid.
inline std::vector<BoundColumn> family_columns(const RunConfig& c, const std::string& family) {
  const auto& grid = c.t_grid;
  const Problem& p = *c.problem;
  std::vector<BoundColumn> cols;

  if (family == "majority") {
    std::optional<ConfusionMatrix> conf;
    std::string conf_error;
    try {
      conf = resolve_confusion(c);
    } catch (const Error& e) {
      conf_error = e.what();
    }
    auto need = [&]() -> const ConfusionMatrix& {
      if (!conf) throw Error(ErrorKind::unsupported, conf_error);
      return *conf;
    };
    cols.push_back(detail::make_column(
        "theorem1", true, grid, [&] { return -sanov_exponent(need()); },
        [&](double t) { return theorem1_bound(need(), t); }));
    cols.push_back(detail::make_column(
        "binary", true, grid,
        [&] {
          const auto& q = need();
          require(q.M() == 2, ErrorKind::unsupported, "binary form needs M = 2");
          double e = kInf;
          for (std::size_t j = 0; j < 2; ++j) {
            require(q(j, j) > 0.5, ErrorKind::margin, "p(j,j) must exceed 1/2");
            e = std::min(e, -std::log(2.0 * std::sqrt(q(j, j) * (1.0 - q(j, j)))));
          }
          return e;
        },
        [&](double t) { return binary_bound(need(), t); }));
    cols.push_back(detail::make_column(
        "clt_majority", false, grid, [&] { return detail::clt_exponent(UtilityMoments::from_confusion(need())); },
        [&](double t) {
          const auto& q = need();
          return detail::worst_row_sum(q.M(), [&](std::size_t j, std::size_t l) { return clt_majority(q(j, j), q(j, l), t); });
        }));
  } else if (family == "ml") {
    cols.push_back(detail::make_column(
        "ml", true, grid, [&] { return min_pairwise_bhattacharyya(p.classes); },
        [&](double t) { return ml_bound(p.classes, t).value; }));
  } else if (family == "utility") {
    std::optional<UtilityMoments> m;
    std::string m_error;
    try {
      m = resolve_moments(c);
    } catch (const Error& e) {
      m_error = e.what();
    }
    auto need = [&]() -> const UtilityMoments& {
      if (!m) throw Error(ErrorKind::unsupported, m_error);
      return *m;
    };
    cols.push_back(detail::make_column(
        "hoeffding", true, grid, [&] { return hoeffding_bound(need(), 0.0).exponent; },
        [&](double t) { return hoeffding_bound(need(), t).value; }));
    cols.push_back(detail::make_column(
        "moment", true, grid, [&] { return moment_bound(need(), 0.0).neg_log_rho; },
        [&](double t) { return moment_bound(need(), t).value; }));
    cols.push_back(detail::make_column(
        "clt_utility", false, grid, [&] { return detail::clt_exponent(need()); },
        [&](double t) {
          const auto& u = need();
          return detail::worst_row_sum(u.M(), [&](std::size_t j, std::size_t l) { return clt_utility(u, j, l, t); });
        }));
  } else if (family == "robust") {
    double eps = 0.0;
    auto epsilon = [&] {
      if (eps > 0.0) return eps;
      if (c.options.contains("epsilon")) eps = c.options.at("epsilon").get<double>();
      else {
        const auto radii = separation_radii(p, derive_seed(c.seed, "separation"));
        eps = c.options.value("epsilon_fraction", 0.5) * *std::min_element(radii.begin(), radii.end());
      }
      return eps;
    };
    cols.push_back(detail::make_column(
        "dgl", true, grid, [&] { return epsilon() * epsilon() / 2.0; },
        [&](double t) { return dgl_bound(epsilon(), p.M(), t); }));
  } else if (family == "prototype" || family == "transformed") {
    const bool transformed = family == "transformed";
    const bool strict = detail::all_gaussian(p) && !p.prototypes;
    const auto protos = p.prototypes_or_means();
    const auto covs = p.covariances();
    std::optional<Matrix> a;
    if (transformed) a = detail::transform_from(c);
    auto pair = [&](std::size_t j, std::size_t l, double t) {
      return transformed ? transformed_bound(*a, protos[j], protos[l], covs[j], t)
                         : prototype_bound(protos[j], protos[l], covs[j], t);
    };
    const std::string prefix = transformed ? "transformed" : "prototype";
    cols.push_back(detail::make_column(
        prefix + "_tight", strict, grid,
        [&] { return detail::min_pair(p.M(), [&](std::size_t j, std::size_t l) { return pair(j, l, 0.0).tight_exponent; }); },
        [&](double t) { return detail::worst_row_sum(p.M(), [&](std::size_t j, std::size_t l) { return pair(j, l, t).tight; }); }));
    cols.push_back(detail::make_column(
        prefix + "_trace", strict, grid,
        [&] { return detail::min_pair(p.M(), [&](std::size_t j, std::size_t l) { return pair(j, l, 0.0).trace_exponent; }); },
        [&](double t) { return detail::worst_row_sum(p.M(), [&](std::size_t j, std::size_t l) { return pair(j, l, t).trace; }); }));
    if (transformed) {
      cols.push_back(detail::make_column(
          "transformed_sigma", strict, grid, [&] { return 1.0 / (8.0 * sigma_of_A(*a, covs, protos)); },
          [&](double t) { return transformed_aggregate_bound(sigma_of_A(*a, covs, protos), p.M(), t); }));
    } else {
      cols.push_back(detail::make_column(
          "clt_prototype", false, grid,
          [&] {
            std::vector<Vector> means;
            for (const auto& cl : p.classes) means.push_back(class_mean(cl));
            return detail::clt_exponent(UtilityMoments::prototype(means, covs, protos));
          },
          [&](double t) {
            std::vector<Vector> means;
            for (const auto& cl : p.classes) means.push_back(class_mean(cl));
            const auto u = UtilityMoments::prototype(means, covs, protos);
            return detail::worst_row_sum(p.M(), [&](std::size_t j, std::size_t l) { return clt_utility(u, j, l, t); });
          }));
    }
  } else if (family == "linear") {
    struct LinearParts {
      double sm = 0.0, sp = 0.0, sa = 0.0;
    };
    std::optional<LinearParts> parts;
    auto need = [&]() -> const LinearParts& {
      if (parts) return *parts;
      require(p.M() == 2, ErrorKind::unsupported, "linear bounds need M = 2");
      const Vector mp = class_mean(p.classes[0]), mm = class_mean(p.classes[1]);
      Vector scale(p.d);
      for (std::size_t i = 0; i < p.d; ++i) {
        if (mp[i] == mm[i]) fail(ErrorKind::degenerate, "class means agree in coordinate " + std::to_string(i + 1));
        scale[i] = 2.0 / (mp[i] - mm[i]);
      }
      const Matrix dmat = Matrix::diagonal(scale);
      const Matrix cp = congruence(dmat, class_covariance(p.classes[0]));
      const Matrix cm = congruence(dmat, class_covariance(p.classes[1]));
      const auto [sm, sp] = linear_score_variances(cm, cp);
      const Vector a = c.classifier.contains("a") ? vector_from_json(c.classifier.at("a")) : Vector::ones(p.d);
      parts = LinearParts{sm, sp, sigma_sq_of_scaling(a, cp, cm, Vector::ones(p.d) * 2.0)};
      return *parts;
    };
    const bool strict = detail::all_gaussian(p);
    cols.push_back(detail::make_column(
        "linear", strict, grid, [&] { return linear_bound(need().sm, need().sp, 0.0).exponent; },
        [&](double t) { return linear_bound(need().sm, need().sp, t).value; }));
    cols.push_back(detail::make_column(
        "linear_scaling", false, grid, [&] { return linear_bound(need().sa, 0.0).exponent; },
        [&](double t) { return linear_bound(need().sa, t).value; }));
  } else {
    fail(ErrorKind::config, "unknown bound family '" + family + "'");
  }
  return cols;
}

struct FamilyReport {
  std::string family;
  std::vector<BoundColumn> columns;
};

inline BoundReport flatten(const std::vector<FamilyReport>& families, const std::vector<std::size_t>& grid) {
  BoundReport r;
  r.t_grid = grid;
  for (const auto& f : families)
    for (const auto& col : f.columns) r.columns.push_back(col);
  return r;
}

inline void write_bound_files(const std::filesystem::path& dir, const std::vector<FamilyReport>& families,
                              const BoundReport& flat) {
  if (families.empty()) return;
  std::vector<std::pair<std::string, const BoundColumn*>> all;
  for (const auto& f : families) {
    std::vector<const BoundColumn*> cols;
    for (const auto& col : f.columns) {
      cols.push_back(&col);
      all.emplace_back(f.family, &col);
    }
    write_text(dir / ("bounds_" + f.family + ".csv"), bounds_csv(flat, cols));
  }
  write_text(dir / "bounds_exponents.csv", exponents_csv(all));
}

/// One CSV per selected family plus an exponent summary; failed preconditions
/// become per-column notes.
inline BoundReport cmd_bounds(const RunConfig& c) {
  if (c.bounds.empty()) return BoundReport{c.t_grid, {}};
  require(!c.t_grid.empty(), ErrorKind::config, "bounds need a t grid");
  std::vector<FamilyReport> families;
  for (const auto& f : c.bounds) families.push_back({f, family_columns(c, f)});
  BoundReport flat = flatten(families, c.t_grid);
  write_bound_files(c.out_dir, families, flat);
  return flat;
}

// --- Simulate --------------------------------------------------------------

inline std::vector<std::string> default_families(const json& classifier) {
  const std::string type = detail::descriptor_type(classifier);
  if (type == "majority") return {"majority"};
  if (type == "ml") return {"ml"};
  if (type == "robust") return {"robust"};
  if (type == "prototype") return {"prototype"};
  if (type == "transformed_prototype") return {"transformed"};
  if (type == "linear") return {"linear"};
  return {};
}

struct SimulateResult {
  SimCurve curve;
  BoundReport report;
  std::vector<AuditRow> audit;
  std::optional<ExponentFit> fit;
};

inline json fit_to_json(const ExponentFit& f) {
  return {{"slope", f.slope},           {"intercept", f.intercept},   {"r_squared", f.r_squared},
          {"points_used", f.points_used}, {"excluded_t", f.excluded_t}};
}

inline SimulateResult cmd_simulate(const RunConfig& c) {
  require(c.trials >= 100, ErrorKind::config, "simulate needs trials >= 100");
  require(!c.t_grid.empty(), ErrorKind::config, "simulate needs a t grid");
  SimulateResult r;
  const BatchClassifier classifier = make_classifier(c);
  r.curve = sweep_t(*c.problem, classifier, c.t_grid, c.trials, c.seed, describe(c.classifier), c.workers);
  write_text(c.out_dir / "curve.csv", curve_csv(r.curve));

  std::vector<FamilyReport> families;
  for (const auto& f : c.bounds.empty() ? default_families(c.classifier) : c.bounds)
    families.push_back({f, family_columns(c, f)});
  r.report = flatten(families, c.t_grid);
  write_bound_files(c.out_dir, families, r.report);
  r.audit = audit_bounds(r.curve, r.report);
  write_text(c.out_dir / "audit.csv", audit_csv(r.audit));

  json fit_json;
  try {
    r.fit = fit_exponent(r.curve, c.options.value("weighted_fit", false));
    fit_json = fit_to_json(*r.fit);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::insufficient_data) throw;
    fit_json = {{"error", e.what()}};
  }
  fit_json["classifier"] = r.curve.classifier;
  fit_json["seed"] = c.seed;
  write_json(c.out_dir / "exponent_fit.json", fit_json);
  return r;
}

// --- Optimize --------------------------------------------------------------

struct OptimizeResult {
  TransformResult selected;
  std::vector<TransformResult> candidates;
  std::vector<double> sigma_sq;  // σ²(A) per candidate
  std::optional<LdaScaling> lda;
};

inline OptimizeResult cmd_optimize(const RunConfig& c) {
  const Problem& p = *c.problem;
  const std::size_t M = c.options.value("columns", p.M());
  require(M >= 1 && M <= p.d, ErrorKind::dimension, "transform needs 1 <= M <= d");
  const ScatterSet s = scatter_matrices(p, c.options.value("regularization", 0.0));
  if (s.degenerate) fail(ErrorKind::degenerate, "S_B vanishes: the class means coincide");
  const auto protos = p.prototypes_or_means();
  const auto covs = p.covariances();

  OptimizeResult out;
  out.candidates.push_back({Matrix::identity(p.d).left_columns(M), "identity", 0.0, 0, {}});
  for (const auto& name : c.optimizers) {
    if (name == "sigma1") {
      const std::size_t starts = c.options.value("multistart", std::size_t{0});
      const TraceRatioResult tr =
          starts > 0 ? trace_ratio_multistart(s.S_B, s.S_W, M, starts, derive_seed(c.seed, "multistart"), c.workers)
                     : trace_ratio_optimize(s.S_B, s.S_W, M);
      if (!tr.converged)
        std::clog << "warning: trace-ratio iteration hit the iteration cap; rho history kept\n";
      out.candidates.push_back({tr.A, "sigma1", 1.0 / tr.rho_star, tr.iterations, tr.rho_history});
    } else if (name == "sigma2") {
      Sigma2Result r;
      try {
        r = sigma2_optimize(s.S_W, s.S_C, M);
      } catch (const Error& e) {
        fail(e.kind(), std::string("S_C: ") + e.what());
      }
      out.candidates.push_back({r.A, "sigma2", r.objective, 0, {}});
    } else {
      fail(ErrorKind::config, "unknown optimizer '" + name + "'");
    }
  }

  std::string table = std::string(kComparisonSchema) + "\n" + csv_line({"candidate", "sigma_sq", "criterion_value"});
  std::size_t best = 0;
  for (std::size_t i = 0; i < out.candidates.size(); ++i) {
    out.sigma_sq.push_back(sigma_of_A(out.candidates[i].A, covs, protos));
    table += csv_line({out.candidates[i].criterion, format_double(out.sigma_sq[i]),
                       format_double(out.candidates[i].value)});
    if (i > 0) write_text(c.out_dir / ("transform_" + out.candidates[i].criterion + ".txt"), transform_text(out.candidates[i]));
  }
  // The winner is chosen among the optimized transforms; the identity is a baseline.
  if (out.candidates.size() > 1) {
    best = 1;
    for (std::size_t i = 2; i < out.candidates.size(); ++i)
      if (out.sigma_sq[i] < out.sigma_sq[best]) best = i;
  }
  table += "# winner: " + out.candidates[best].criterion + "\n";
  out.selected = out.candidates[best];
  write_text(c.out_dir / "selection.csv", table);
  write_text(c.out_dir / "transform.txt", transform_text(out.selected));

  if (p.M() == 2) {
    const Vector mp = class_mean(p.classes[0]), mm = class_mean(p.classes[1]);
    Vector scale(p.d);
    bool ok = true;
    for (std::size_t i = 0; i < p.d; ++i) {
      ok = ok && mp[i] != mm[i];
      if (ok) scale[i] = 2.0 / (mp[i] - mm[i]);
    }
    std::string text = "# schema: repobs.lda/1\n";
    if (ok) {
      const Matrix dmat = Matrix::diagonal(scale);
      const Matrix cp = congruence(dmat, covs[0]), cm = congruence(dmat, covs[1]);
      out.lda = lda_scaling(cp, cm);
      const Vector ones = Vector::ones(p.d);
      text += csv_line({"quantity", "value"});
      text += csv_line({"sigma_tilde_sq_a_star", format_double(out.lda->sigma_tilde_sq)});
      text += csv_line({"sigma_tilde_sq_ones", format_double(sigma_tilde(ones, cp, cm, ones * 2.0))});
      for (std::size_t i = 0; i < p.d; ++i)
        text += csv_line({"a_star_" + std::to_string(i + 1), format_double(out.lda->a_star[i])});
    } else {
      text += "# unavailable: class means agree in some coordinate\n";
    }
    write_text(c.out_dir / "lda.csv", text);
  }
  return out;
}

// --- Exponent --------------------------------------------------------------

struct ExponentResult {
  ExponentFit fit;
  json comparison = json::array();
};

/// Fits a curve CSV and compares with bounds_exponents.csv next to it, if present.
inline ExponentResult cmd_exponent(const std::filesystem::path& curve_path, const std::filesystem::path& out_dir,
                                   bool weighted = false) {
  const CurvePoints pts = read_curve_csv(curve_path);
  std::vector<double> w;
  if (weighted) {
    const auto rows = read_csv(curve_path);
    std::size_t trials_col = rows.front().size();
    for (std::size_t i = 0; i < rows.front().size(); ++i)
      if (rows.front()[i] == "trials") trials_col = i;
    require(trials_col < rows.front().size(), ErrorKind::config, "weighted fit needs a trials column");
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const double n = parse_double(rows[r][trials_col]), ph = pts.p_hat[r - 1];
      w.push_back(ph > 0.0 && ph < 1.0 ? n * ph / (1.0 - ph) : 0.0);
    }
  }
  ExponentResult r;
  r.fit = fit_exponent(pts.t, pts.p_hat, w);
  const auto sibling = curve_path.parent_path() / "bounds_exponents.csv";
  if (std::filesystem::exists(sibling)) {
    const auto rows = read_csv(sibling);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() < 4 || rows[i][3].empty()) continue;
      const double e = parse_double(rows[i][3]);
      r.comparison.push_back({{"bound", rows[i][1]},
                              {"kind", rows[i][2]},
                              {"exponent", e},
                              {"fitted_rate", -r.fit.slope},
                              {"bound_not_above_fit", e <= -r.fit.slope}});
    }
  }
  json j = fit_to_json(r.fit);
  j["curve"] = curve_path.filename().string();
  j["weighted"] = weighted;
  j["comparison"] = r.comparison;
  write_json(out_dir / "exponent_fit.json", j);
  return r;
}

}  // namespace repobs
