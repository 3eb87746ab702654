#include <gtest/gtest.h>

#include <filesystem>

#include "helpers.hpp"
#include "repobs/commands.hpp"
#include "repobs/io.hpp"

using namespace repobs;

TEST(Io, DoublesRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) EXPECT_EQ(parse_double(format_double(v)), v);
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(kInf), "inf");
  EXPECT_THROW(parse_double("1.5x"), Error);
}

TEST(Io, ProblemJsonRoundTrip) {
  Problem p = make_problem({GaussianClass(Vector{1.0, 2.0}, Matrix{{1.0, 0.2}, {0.2, 0.5}}),
                            DiscreteClass({Vector{0.0, 0.0}, Vector{1.0, 1.0}}, {0.25, 0.75})},
                           {0.4, 0.6});
  p.prototypes = std::vector<Vector>{Vector{0.0, 1.0}, Vector{1.0, 0.0}};
  const Problem q = problem_from_json(json::parse(to_json(p).dump()));
  EXPECT_EQ(q.d, 2u);
  EXPECT_EQ(q.priors, p.priors);
  EXPECT_EQ(to_json(q), to_json(p));
}

TEST(Io, MalformedProblemIsConfigError) {
  try {
    problem_from_json(json::parse(R"({"classes": [{"type": "gaussian", "mean": [0.0]}]})"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
  EXPECT_THROW(problem_from_json(json::parse(R"({"classes": [{"type": "cauchy"}]})")), Error);
}

TEST(Io, TransformTextRoundTrip) {
  TransformResult r{testing_support::random_matrix(4, 2, 3), "sigma1", 0.123456789, 7, {0.5, 0.75, 0.8}};
  const TransformResult q = parse_transform(transform_text(r));
  EXPECT_EQ(q.criterion, "sigma1");
  EXPECT_EQ(q.value, r.value);
  EXPECT_EQ(q.iterations, 7u);
  EXPECT_EQ(q.rho_history, r.rho_history);
  EXPECT_EQ((q.A - r.A).max_abs(), 0.0);
  // column-major storage
  EXPECT_NE(transform_text(TransformResult{Matrix{{1, 2}, {3, 4}}, "x", 0, 0, {}}).find("\nA 1 3 2 4\n"),
            std::string::npos);
}

TEST(Io, RobustTableRoundTrip) {
  const RobustRuleTable t = build_robust_table({GaussianClass::isotropic(Vector{0.0}), GaussianClass::isotropic(Vector{1.0})}, 500, 4);
  const RobustRuleTable u = robust_table_from_json(json::parse(to_json(t).dump()));
  EXPECT_EQ(u.integrals, t.integrals);
  EXPECT_EQ(u.sets, t.sets);
  EXPECT_EQ(u.seed, t.seed);
}

TEST(Io, TGridGrammar) {
  EXPECT_EQ(parse_t_grid("1:9:2"), (std::vector<std::size_t>{1, 3, 5, 7, 9}));
  EXPECT_EQ(parse_t_grid("4,8,16"), (std::vector<std::size_t>{4, 8, 16}));
  EXPECT_EQ(parse_t_grid("5"), (std::vector<std::size_t>{5}));
  for (const char* bad : {"", "1:5", "1:5:0", "5:1:1", "a,b", "3,2", "1,,2", "0:3:1", "1:3:1:", "1.5"})
    EXPECT_THROW(parse_t_grid(bad), Error) << bad;
}

TEST(Io, CurveCsvRoundTrip) {
  SimCurve c;
  ErrorEstimate e;
  e.t = 3;
  e.per_class = {Proportion::of(10, 100), Proportion::of(20, 100)};
  e.pooled = Proportion::of(30, 200);
  c.points = {e};
  const auto dir = std::filesystem::temp_directory_path() / "repobs_io_test";
  write_text(dir / "curve.csv", curve_csv(c));
  const CurvePoints pts = read_curve_csv(dir / "curve.csv");
  EXPECT_EQ(pts.t, (std::vector<double>{3.0}));
  EXPECT_EQ(pts.p_hat, (std::vector<double>{0.15}));
  EXPECT_EQ(curve_csv(c).rfind(kCurveSchema, 0), 0u);
  std::filesystem::remove_all(dir);
}

TEST(Io, ConfusionOnlyConfigReproducesMatrix) {
  const RunConfig c = config_from_json(json::parse(R"({"confusion": [[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.0, 0.3, 0.7]]})"));
  const ConfusionMatrix p = resolve_confusion(config_from_json(
      json::parse(R"({"problem": )" + to_json(*c.problem).dump() + R"(, "classifier": {"type": "majority"}})")));
  EXPECT_NEAR(p(2, 1), 0.3, 1e-15);
  EXPECT_NEAR(p(0, 0), 0.7, 1e-15);
}
