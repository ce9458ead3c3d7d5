#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("sde_sindy_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Outcome cli(const std::string& args, const std::string& env = "") {
  const auto dir = fs::temp_directory_path();
  const auto out = dir / "sde_sindy_cli_stdout";
  const auto err = dir / "sde_sindy_cli_stderr";
  const std::string cmd = env + " '" SDE_SINDY_CLI "' " + args + " >'" + out.string() + "' 2>'" +
                          err.string() + "'";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = slurp(out);
  o.err = slurp(err);
  return o;
}

fs::path small_config(const fs::path& dir) {
  const auto p = dir / "small.json";
  std::ofstream(p) << R"({
    "model": {"dim": 1, "drift": [{"x": -1}], "diffusion": [[{"1": 1}]]},
    "drift_dictionary": "monomial:2", "diffusion_dictionary": "monomial:0",
    "sim_dt": 0.001, "dt_values": [0.01, 0.02, 0.04], "T_values": [20, 40],
    "trials": 6, "base_seed": 11,
    "methods": ["drift_fd1", "drift_trap", "diff_fd1", "diff_drift_sub"]
  })";
  return p;
}

}  // namespace

TEST(Cli, ZooListsPublishedSettings) {
  const auto o = cli("zoo");
  EXPECT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("double_well (dim 1): λ_drift=0.005, λ_diff=0.001, T=20000"),
            std::string::npos);
  EXPECT_NE(o.out.find("van_der_pol (dim 2)"), std::string::npos);
  EXPECT_NE(o.out.find("lorenz (dim 3)"), std::string::npos);
}

TEST(Cli, TruthPrintsCoefficients) {
  const auto o = cli("truth double_well monomial:4");
  EXPECT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("mu[1]: x:0.5, x^3:-1"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("Sigma[1,1]: 1:0.5, x^2:0.25, x^4:0.03125"), std::string::npos) << o.out;
}

TEST(Cli, TruthReportsUnrepresentableTargets) {
  const auto partial = cli("truth double_well monomial:3");
  EXPECT_EQ(partial.code, 0);
  EXPECT_NE(partial.err.find("diffusion"), std::string::npos);
  EXPECT_EQ(cli("truth double_well monomial:1").code, 1);
  EXPECT_EQ(cli("truth duffing monomial:3").code, 1);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
  EXPECT_EQ(cli("run").code, 1);
  EXPECT_EQ(cli("--help").code, 0);
}

TEST(Cli, MissingConfigExitsOneWithoutOutput) {
  const auto dir = scratch("missing");
  const auto o = cli("run '" + (dir / "nope.json").string() + "' --out '" + (dir / "o").string() + "'");
  EXPECT_EQ(o.code, 1);
  EXPECT_FALSE(fs::exists(dir / "o"));
  EXPECT_NE(o.err.find("cannot open"), std::string::npos);
}

TEST(Cli, InvalidConfigExitsOne) {
  const auto dir = scratch("invalid");
  std::ofstream(dir / "bad.json") << R"({"model": "lorenz", "sim_dt": 0.001,
    "dt_values": [0.0015], "T_values": [10], "methods": ["drift_fd1"]})";
  EXPECT_EQ(cli("run '" + (dir / "bad.json").string() + "' --out '" + dir.string() + "'").code, 1);
  std::ofstream(dir / "broken.json") << "{ not json";
  EXPECT_EQ(cli("run '" + (dir / "broken.json").string() + "' --out '" + dir.string() + "'").code, 1);
}

TEST(Cli, RunIsByteIdenticalAcrossInvocations) {
  const auto dir = scratch("run");
  const auto cfg = small_config(dir);
  const auto a = cli("run '" + cfg.string() + "' --out '" + (dir / "a").string() + "'");
  const auto b = cli("run '" + cfg.string() + "' --out '" + (dir / "b").string() + "' --threads 2");
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const std::string csv = slurp(dir / "a" / "results.csv");
  EXPECT_EQ(csv, slurp(dir / "b" / "results.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,target,dt,T,trials,diverged,err_mean,err_var");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 4 * 3 * 2);
  for (const char* f : {"plot_drift_mean_vs_dt.tsv", "plot_drift_var_vs_dt.tsv",
                        "plot_drift_var_vs_T.tsv", "plot_diffusion_var_vs_T.tsv"})
    EXPECT_TRUE(fs::exists(dir / "a" / f)) << f;
  EXPECT_FALSE(fs::exists(dir / "a" / "failures.tsv"));
  EXPECT_NE(a.err.find("trial 6/6"), std::string::npos);
  EXPECT_NE(a.out.find("results.csv"), std::string::npos);
}

TEST(Cli, SeedEnvironmentOverride) {
  const auto dir = scratch("seed");
  const auto cfg = small_config(dir);
  ASSERT_EQ(cli("run '" + cfg.string() + "' --out '" + (dir / "a").string() + "'").code, 0);
  ASSERT_EQ(cli("run '" + cfg.string() + "' --out '" + (dir / "b").string() + "'", "SINDY_SEED=12").code, 0);
  ASSERT_EQ(cli("run '" + cfg.string() + "' --out '" + (dir / "c").string() + "'", "SINDY_SEED=11").code, 0);
  EXPECT_NE(slurp(dir / "a" / "results.csv"), slurp(dir / "b" / "results.csv"));
  EXPECT_EQ(slurp(dir / "a" / "results.csv"), slurp(dir / "c" / "results.csv"));
  EXPECT_EQ(cli("run '" + cfg.string() + "' --out '" + (dir / "d").string() + "'", "SINDY_SEED=x").code, 1);
}

TEST(Cli, OrderReadsResults) {
  const auto dir = scratch("order");
  const auto cfg = small_config(dir);
  ASSERT_EQ(cli("run '" + cfg.string() + "' --out '" + dir.string() + "'").code, 0);
  const auto o = cli("order '" + (dir / "results.csv").string() + "'");
  EXPECT_EQ(o.code, 0);
  EXPECT_EQ(o.out.substr(0, o.out.find('\n')), "method,target,T,points,slope");
  EXPECT_NE(o.out.find("drift_fd1,drift,40,3,"), std::string::npos) << o.out;
  EXPECT_EQ(cli("order '" + (dir / "absent.csv").string() + "'").code, 2);
}
