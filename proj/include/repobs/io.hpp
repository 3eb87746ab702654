#pragma once

// JSON problem files, CSV artifacts with a schema comment line, and the flat
// TransformResult format. Doubles are written in shortest round-trip form.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "repobs/bounds.hpp"
#include "repobs/classifiers.hpp"
#include "repobs/error.hpp"
#include "repobs/linalg.hpp"
#include "repobs/models.hpp"
#include "repobs/sim.hpp"
#include "repobs/transform.hpp"

namespace repobs {

using json = nlohmann::json;

inline constexpr const char* kCurveSchema = "# schema: repobs.simcurve/1";
inline constexpr const char* kBoundsSchema = "# schema: repobs.bounds/1";
inline constexpr const char* kExponentsSchema = "# schema: repobs.exponents/1";
inline constexpr const char* kAuditSchema = "# schema: repobs.audit/1";
inline constexpr const char* kComparisonSchema = "# schema: repobs.selection/1";

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(ErrorKind::config, "not a number: '" + s + "'");
  return v;
}

// --- JSON ------------------------------------------------------------------

inline Vector vector_from_json(const json& j) {
  require(j.is_array(), ErrorKind::config, "expected an array of numbers");
  std::vector<double> v;
  for (const auto& x : j) {
    require(x.is_number(), ErrorKind::config, "expected a number");
    v.push_back(x.get<double>());
  }
  return Vector(std::move(v));
}

inline Matrix matrix_from_json(const json& j) {
  require(j.is_array() && !j.empty(), ErrorKind::config, "expected a nonempty array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const Vector row = vector_from_json(j[r]);
    require(row.size() == cols, ErrorKind::config, "ragged matrix");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = row[c];
  }
  return m;
}

inline json to_json(const Vector& v) { return json(v.values()); }

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

/// {"type": "gaussian", "mean": [...], "cov": [[...]]} or
/// {"type": "discrete", "support": [[...]], "pmf": [...]}; "variance" gives an isotropic Gaussian.
inline ClassModel class_from_json(const json& j) {
  const std::string type = j.value("type", "");
  if (type == "gaussian") {
    Vector mean = vector_from_json(j.at("mean"));
    if (j.contains("variance")) return GaussianClass::isotropic(std::move(mean), j.at("variance").get<double>());
    return GaussianClass(std::move(mean), matrix_from_json(j.at("cov")));
  }
  if (type == "discrete") {
    std::vector<Vector> support;
    for (const auto& s : j.at("support")) support.push_back(s.is_array() ? vector_from_json(s) : Vector{s.get<double>()});
    return DiscreteClass(std::move(support), vector_from_json(j.at("pmf")).values());
  }
  fail(ErrorKind::config, "unknown class type '" + type + "'");
}

inline json to_json(const ClassModel& c) {
  if (const auto* g = std::get_if<GaussianClass>(&c))
    return {{"type", "gaussian"}, {"mean", to_json(g->mean())}, {"cov", to_json(g->covariance())}};
  const auto& dc = std::get<DiscreteClass>(c);
  json support = json::array();
  for (const auto& s : dc.support()) support.push_back(to_json(s));
  return {{"type", "discrete"}, {"support", support}, {"pmf", dc.pmf()}};
}

inline Problem problem_from_json(const json& j) {
  try {
    require(j.contains("classes"), ErrorKind::config, "problem needs 'classes'");
    std::vector<ClassModel> classes;
    for (const auto& c : j.at("classes")) classes.push_back(class_from_json(c));
    std::vector<double> priors;
    if (j.contains("priors")) priors = vector_from_json(j.at("priors")).values();
    Problem p = make_problem(std::move(classes), std::move(priors));
    if (j.contains("d")) require(j.at("d").get<std::size_t>() == p.d, ErrorKind::config, "'d' disagrees with classes");
    if (j.contains("prototypes")) {
      std::vector<Vector> protos;
      for (const auto& x : j.at("prototypes")) protos.push_back(vector_from_json(x));
      p.prototypes = std::move(protos);
    }
    p.validate();
    return p;
  } catch (const json::exception& e) {
    fail(ErrorKind::config, std::string("malformed problem: ") + e.what());
  }
}

inline json to_json(const Problem& p) {
  json classes = json::array();
  for (const auto& c : p.classes) classes.push_back(to_json(c));
  json j = {{"d", p.d}, {"classes", classes}, {"priors", p.priors}};
  if (p.prototypes) {
    json protos = json::array();
    for (const auto& x : *p.prototypes) protos.push_back(to_json(x));
    j["prototypes"] = protos;
  }
  return j;
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::config, "malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::config, "cannot write " + path.string());
  out << text;
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// --- Robust table cache ----------------------------------------------------

inline json to_json(const RobustRuleTable& t) {
  json sets = json::array();
  for (const auto& [i, j] : t.sets) sets.push_back({i, j});
  return {{"M", t.M}, {"samples", t.samples}, {"seed", t.seed}, {"sets", sets}, {"integrals", t.integrals}};
}

inline RobustRuleTable robust_table_from_json(const json& j) {
  RobustRuleTable t;
  t.M = j.at("M").get<std::size_t>();
  t.samples = j.at("samples").get<std::size_t>();
  t.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& s : j.at("sets")) t.sets.emplace_back(s[0].get<std::size_t>(), s[1].get<std::size_t>());
  t.integrals = j.at("integrals").get<std::vector<std::vector<double>>>();
  require(t.sets == comparison_sets(t.M) && t.integrals.size() == t.M, ErrorKind::config, "corrupt robust table");
  return t;
}

// --- CSV -------------------------------------------------------------------

inline std::string csv_line(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) s += ',';
    s += cells[i];
  }
  return s + '\n';
}

/// Rows of cells, skipping '#' comment lines.
inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline std::string curve_csv(const SimCurve& curve) {
  std::string s = std::string(kCurveSchema) + "\n";
  std::vector<std::string> head = {"t", "trials", "errors", "p_hat", "ci_low", "ci_high",
                                   "prior_weighted", "max_over_class"};
  const std::size_t M = curve.points.empty() ? 0 : curve.points.front().per_class.size();
  for (std::size_t j = 1; j <= M; ++j)
    for (const char* f : {"p_hat_", "ci_low_", "ci_high_"}) head.push_back(f + std::to_string(j));
  s += csv_line(head);
  for (const auto& p : curve.points) {
    std::vector<std::string> row = {std::to_string(p.t),          std::to_string(p.pooled.trials),
                                    std::to_string(p.pooled.errors), format_double(p.pooled.p_hat),
                                    format_double(p.pooled.ci.low), format_double(p.pooled.ci.high),
                                    format_double(p.prior_weighted), format_double(p.max_over_class)};
    for (const auto& c : p.per_class) {
      row.push_back(format_double(c.p_hat));
      row.push_back(format_double(c.ci.low));
      row.push_back(format_double(c.ci.high));
    }
    s += csv_line(row);
  }
  return s;
}

/// (t, p_hat) pairs from a curve CSV; only the t and p_hat columns are required.
struct CurvePoints {
  std::vector<double> t;
  std::vector<double> p_hat;
};

inline CurvePoints read_curve_csv(const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  require(!rows.empty(), ErrorKind::config, "empty curve file " + path.string());
  const auto& head = rows.front();
  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < head.size(); ++i)
      if (head[i] == name) return i;
    fail(ErrorKind::config, "curve file lacks column '" + name + "'");
  };
  const std::size_t ti = column("t"), pi = column("p_hat");
  CurvePoints out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    require(rows[r].size() == head.size(), ErrorKind::config, "ragged curve row " + std::to_string(r));
    out.t.push_back(parse_double(rows[r][ti]));
    out.p_hat.push_back(parse_double(rows[r][pi]));
  }
  return out;
}

/// Wide table: one column per bound; a failed bound fills its cells with its note.
inline std::string bounds_csv(const BoundReport& report, const std::vector<const BoundColumn*>& columns) {
  std::string s = std::string(kBoundsSchema) + "\n";
  std::vector<std::string> head = {"t"};
  for (const auto* c : columns) head.push_back(c->name);
  s += csv_line(head);
  for (std::size_t i = 0; i < report.t_grid.size(); ++i) {
    std::vector<std::string> row = {std::to_string(report.t_grid[i])};
    for (const auto* c : columns) row.push_back(c->values.empty() ? c->note : format_double(c->values[i]));
    s += csv_line(row);
  }
  return s;
}

inline std::string exponents_csv(const std::vector<std::pair<std::string, const BoundColumn*>>& columns) {
  std::string s = std::string(kExponentsSchema) + "\n";
  s += csv_line({"family", "bound", "kind", "exponent", "note"});
  for (const auto& [family, c] : columns) {
    const std::string e = c->exponents.empty() ? "" : format_double(c->exponents.front());
    s += csv_line({family, c->name, c->strict ? "strict" : "approx", e, c->note});
  }
  return s;
}

inline std::string audit_csv(const std::vector<AuditRow>& rows) {
  std::string s = std::string(kAuditSchema) + "\n";
  s += csv_line({"t", "bound_name", "bound_value", "ci_low", "verdict"});
  for (const auto& r : rows)
    s += csv_line({std::to_string(r.t), r.bound_name, format_double(r.bound_value), format_double(r.ci_low),
                   r.verdict});
  return s;
}

// --- TransformResult -------------------------------------------------------

inline std::string transform_text(const TransformResult& r) {
  std::string s = "d " + std::to_string(r.A.rows()) + "\nM " + std::to_string(r.A.cols()) + "\nA";
  for (std::size_t c = 0; c < r.A.cols(); ++c)
    for (std::size_t i = 0; i < r.A.rows(); ++i) s += " " + format_double(r.A(i, c));
  s += "\ncriterion " + r.criterion + "\nvalue " + format_double(r.value) + "\niterations " +
       std::to_string(r.iterations) + "\nrho_history";
  for (double rho : r.rho_history) s += " " + format_double(rho);
  return s + "\n";
}

inline TransformResult parse_transform(const std::string& text) {
  std::istringstream in(text);
  std::string key;
  std::size_t d = 0, M = 0;
  TransformResult r;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    ls >> key;
    std::string tok;
    if (key == "d") ls >> d;
    else if (key == "M") ls >> M;
    else if (key == "A") {
      require(d > 0 && M > 0, ErrorKind::config, "A precedes d and M");
      r.A = Matrix(d, M);
      for (std::size_t c = 0; c < M; ++c)
        for (std::size_t i = 0; i < d; ++i) {
          require(static_cast<bool>(ls >> tok), ErrorKind::config, "A has too few entries");
          r.A(i, c) = parse_double(tok);
        }
    } else if (key == "criterion") ls >> r.criterion;
    else if (key == "value") {
      ls >> tok;
      r.value = parse_double(tok);
    } else if (key == "iterations") ls >> r.iterations;
    else if (key == "rho_history")
      while (ls >> tok) r.rho_history.push_back(parse_double(tok));
  }
  require(r.A.rows() == d && d > 0, ErrorKind::config, "transform file lacks A");
  return r;
}

}  // namespace repobs
