#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "repobs/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = REPOBS_CONFIGS;

int run(const std::string& args) {
  const std::string cmd = std::string(REPOBS_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("repobs_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string config_arg(const std::string& name) { return "--config " + (kConfigs / name).string(); }

}  // namespace

TEST(Cli, BoundsMajorityColumn) {
  const fs::path out = scratch("bounds");
  ASSERT_EQ(run("bounds " + config_arg("binary_p08.json") + " --t-grid 1:20:1 --out " + out.string()), 0);
  const auto rows = repobs::read_csv(out / "bounds_majority.csv");
  ASSERT_EQ(rows.size(), 21u);
  EXPECT_EQ(rows[0][1], "theorem1");
  EXPECT_NEAR(repobs::parse_double(rows[1][1]), 0.8, 1e-15);
  EXPECT_NEAR(repobs::parse_double(rows[20][1]), 0.011529215046068475, 1e-15);
  EXPECT_TRUE(fs::exists(out / "bounds_utility.csv"));
  EXPECT_EQ(slurp(out / "bounds_majority.csv").rfind("# schema: repobs.bounds/1", 0), 0u);
}

TEST(Cli, MarginFailureIsPerColumn) {
  const fs::path out = scratch("margin");
  ASSERT_EQ(run("bounds " + config_arg("margin_tie.json") + " --out " + out.string()), 0);
  const auto rows = repobs::read_csv(out / "bounds_majority.csv");
  EXPECT_EQ(rows[0][1], "theorem1");
  EXPECT_NE(rows[1][1].find("margin"), std::string::npos);
  EXPECT_EQ(rows[0][3], "clt_majority");
  EXPECT_NEAR(repobs::parse_double(rows[1][3]), 0.5, 1e-15);
  const auto dgl = repobs::read_csv(out / "bounds_robust.csv");
  EXPECT_NEAR(repobs::parse_double(dgl[1][1]), 4 * std::exp(-0.02), 1e-14);
}

TEST(Cli, EmptyBoundListWritesNothing) {
  const fs::path out = scratch("empty");
  ASSERT_EQ(run("bounds " + config_arg("empty_bounds.json") + " --out " + (out / "x").string()), 0);
  EXPECT_FALSE(fs::exists(out / "x"));
}

TEST(Cli, SimulateRejectsTooFewTrials) {
  const fs::path out = scratch("few");
  EXPECT_EQ(run("simulate " + config_arg("binary_p08.json") + " --trials 10 --out " + out.string()), 2);
}

TEST(Cli, MalformedConfigAndFlags) {
  const fs::path dir = scratch("bad");
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_EQ(run("bounds --config " + (dir / "bad.json").string()), 2);
  EXPECT_EQ(run("bounds " + config_arg("binary_p08.json") + " --t-grid 1:x:2 --out " + dir.string()), 2);
  EXPECT_EQ(run("frobnicate"), 2);
}

TEST(Cli, SimulateIsByteReproducible) {
  const fs::path a = scratch("sim_a"), b = scratch("sim_b");
  const std::string common = "simulate " + config_arg("binary_p08.json") + " --trials 20000 --t-grid 1:9:2";
  ASSERT_EQ(run(common + " --workers 1 --out " + a.string()), 0);
  ASSERT_EQ(run(common + " --workers 4 --out " + b.string()), 0);
  for (const char* f : {"curve.csv", "audit.csv", "exponent_fit.json", "bounds_majority.csv"}) {
    EXPECT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_EQ(slurp(a / "audit.csv").find("VIOLATION"), std::string::npos);
}

TEST(Cli, ExponentCommand) {
  const fs::path dir = scratch("exp");
  std::string csv = "# schema: repobs.simcurve/1\nt,p_hat\n";
  for (int t = 1; t <= 8; ++t) csv += std::to_string(t) + "," + repobs::format_double(std::exp(-0.5 * t)) + "\n";
  repobs::write_text(dir / "curve.csv", csv);
  ASSERT_EQ(run("exponent --curve " + (dir / "curve.csv").string()), 0);
  const auto fit = repobs::read_json(dir / "exponent_fit.json");
  EXPECT_NEAR(fit.at("slope").get<double>(), -0.5, 1e-12);
  repobs::write_text(dir / "zeros.csv", "t,p_hat\n1,0\n2,0\n3,0\n4,0\n");
  EXPECT_EQ(run("exponent --curve " + (dir / "zeros.csv").string() + " --out " + dir.string()), 3);
}

TEST(Cli, OptimizeWritesSelection) {
  const fs::path out = scratch("opt");
  ASSERT_EQ(run("optimize " + config_arg("optimize_three_class.json") + " --out " + out.string()), 0);
  const std::string sel = slurp(out / "selection.csv");
  EXPECT_NE(sel.find("sigma1,"), std::string::npos);
  EXPECT_NE(sel.find("sigma2,"), std::string::npos);
  EXPECT_NE(sel.find("identity,"), std::string::npos);
  EXPECT_NE(sel.find("# winner: sigma"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "transform.txt"));
  EXPECT_FALSE(fs::exists(out / "lda.csv"));
  const fs::path two = scratch("opt2");
  ASSERT_EQ(run("optimize " + config_arg("optimize_two_class.json") + " --out " + two.string()), 0);
  EXPECT_TRUE(fs::exists(two / "lda.csv"));
}

TEST(Cli, OptimizeDegenerateMeansIsNumericalFailure) {
  const fs::path dir = scratch("degenerate");
  std::ofstream(dir / "c.json") << R"({"problem": {"classes": [
    {"type": "gaussian", "mean": [0.0, 0.0], "variance": 1.0},
    {"type": "gaussian", "mean": [0.0, 0.0], "variance": 2.0}]}})";
  EXPECT_EQ(run("optimize --config " + (dir / "c.json").string() + " --out " + dir.string()), 4);
}
