#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sde_sindy/harness/config.hpp>
#include <sde_sindy/harness/experiment.hpp>
#include <sde_sindy/harness/report_io.hpp>

using namespace sde_sindy;
using namespace sde_sindy::harness;
using nlohmann::json;

namespace {

json base_config() {
  return json::parse(R"({
    "model": {"dim": 1, "drift": [{"x": -1.0}], "diffusion": [[{"1": 0.5}]]},
    "drift_dictionary": "monomial:1",
    "diffusion_dictionary": "monomial:0",
    "sim_dt": 0.001,
    "dt_values": [0.01, 0.02],
    "T_values": [10, 20],
    "trials": 4,
    "base_seed": 3,
    "methods": ["drift_fd1", "drift_trap", "diff_fd1", "diff_trap"]
  })");
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("sde_sindy_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

ErrorReport report(const std::string& method, Target t, double dt, double T, double m, double v) {
  ErrorReport r;
  r.method = method;
  r.target = t;
  r.dt = dt;
  r.T = T;
  r.trials = 10;
  r.err_mean = m;
  r.err_var = v;
  return r;
}

}  // namespace

TEST(Config, ParsesInlineModel) {
  const auto cfg = parse_config(base_config(), false);
  EXPECT_EQ(cfg.model.dim, 1);
  EXPECT_EQ(cfg.methods.size(), 4u);
  EXPECT_EQ(cfg.methods[1].kind, MethodKind::drift_trap);
  EXPECT_EQ(cfg.stride_of(0.02), 20u);
  EXPECT_EQ(cfg.variance_series_dt(), 0.01);
  EXPECT_DOUBLE_EQ(cfg.model.drift(Vector::Constant(1, 2.0))(0), -2.0);
}

TEST(Config, FullScaleDoubleWellAccepted) {
  auto j = base_config();
  j["model"] = "double_well";
  j["drift_dictionary"] = "monomial:14";
  j["diffusion_dictionary"] = "monomial:14";
  j["sim_dt"] = 2e-4;
  j["dt_values"] = {0.002, 0.004};
  j["T_values"] = {20000};
  j["solver"] = "stls";
  j["lambda_drift"] = 0.005;
  j["lambda_diffusion"] = 0.001;
  const auto cfg = parse_config(j, false);
  EXPECT_EQ(cfg.drift_dict().size(), 15);
  EXPECT_EQ(cfg.solver, SolverKind::stls);
}

TEST(Config, ShippedConfigsLoad) {
  int n = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(SDE_SINDY_CONFIGS)) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_config(e.path().string(), false)) << e.path();
    ++n;
  }
  EXPECT_GE(n, 8);
}

TEST(Config, RejectsInvariantViolations) {
  auto bad = [](auto edit) {
    auto j = base_config();
    edit(j);
    EXPECT_THROW(parse_config(j, false), ConfigError) << j.dump();
  };
  bad([](json& j) { j["dt_values"] = {0.0105}; });      // not a multiple of sim_dt
  bad([](json& j) { j["dt_values"] = {0.005}; });       // fewer than 10 steps
  bad([](json& j) { j["T_values"] = {10.01}; });        // not a multiple of max dt
  bad([](json& j) { j["methods"] = {"drift_rk4"}; });
  bad([](json& j) { j["methods"] = json::array(); });
  bad([](json& j) { j["lambda_drift"] = -1; });
  bad([](json& j) { j["solver"] = "lasso"; });
  bad([](json& j) { j["colour"] = "blue"; });
  bad([](json& j) { j["trials"] = 1; });
  bad([](json& j) { j["drift_dictionary"] = "poly:2"; });
  bad([](json& j) { j["model"] = "duffing"; });
  bad([](json& j) { j["variance_dt"] = 0.03; });
  bad([](json& j) { j.erase("sim_dt"); });
  bad([](json& j) { j["methods"] = {"drift_fd1", "drift_fd1"}; });
  bad([](json& j) { j["methods"] = {{{"kind", "drift_fd1"}, {"a", {1.0}}}}; });
}

TEST(Config, GeneralMethodScalesWithDt) {
  auto j = base_config();
  j["methods"] = {{{"kind", "drift_general"}, {"name", "ab2"}, {"a", {1.0, 0.0, 0.0}}, {"b", {2.0, -0.5}}}};
  const auto cfg = parse_config(j, false);
  const auto spec = cfg.methods[0].spec_for(0.01);
  EXPECT_DOUBLE_EQ(spec.lmm_b[0], 200.0);
  EXPECT_DOUBLE_EQ(spec.lmm_b[1], -50.0);
  EXPECT_EQ(cfg.max_delay(), 2);
  EXPECT_EQ(cfg.methods[0].name, "ab2");
}

TEST(Config, SeedOverrideFromEnvironment) {
  ::setenv("SINDY_SEED", "987", 1);
  EXPECT_EQ(parse_config(base_config(), true).base_seed, 987u);
  EXPECT_EQ(parse_config(base_config(), false).base_seed, 3u);
  ::setenv("SINDY_SEED", "abc", 1);
  EXPECT_THROW(parse_config(base_config(), true), ConfigError);
  ::unsetenv("SINDY_SEED");
}

TEST(Config, UnrepresentableTruthIsConfigError) {
  auto j = base_config();
  j["model"] = "double_well";
  j["drift_dictionary"] = "monomial:2";
  EXPECT_THROW(run_experiment(parse_config(j, false)), ConfigError);
}

TEST(Experiment, ReportsEveryCellInOrder) {
  const auto cfg = parse_config(base_config(), false);
  const auto res = run_experiment(cfg, {1, {}});
  ASSERT_EQ(res.reports.size(), 4u * 2u * 2u);
  EXPECT_EQ(res.reports[0].method, "drift_fd1");
  EXPECT_EQ(res.reports[0].dt, 0.01);
  EXPECT_EQ(res.reports[1].T, 20);
  EXPECT_EQ(res.reports.back().method, "diff_trap");
  EXPECT_EQ(res.reports.back().target, Target::diffusion);
  for (const auto& r : res.reports) {
    EXPECT_EQ(r.trials, 4);
    EXPECT_EQ(r.diverged, 0);
    EXPECT_TRUE(std::isfinite(r.err_mean));
  }
}

TEST(Experiment, DeterministicAcrossThreadCounts) {
  const auto cfg = parse_config(base_config(), false);
  const auto a = run_experiment(cfg, {1, {}});
  const auto b = run_experiment(cfg, {3, {}});
  ASSERT_EQ(a.reports.size(), b.reports.size());
  for (std::size_t i = 0; i < a.reports.size(); ++i) {
    EXPECT_EQ(a.reports[i].err_mean, b.reports[i].err_mean);
    EXPECT_EQ(a.reports[i].err_var, b.reports[i].err_var);
  }
}

TEST(Experiment, TrialsIndependentOfEnsembleSize) {
  auto j = base_config();
  const auto small = run_experiment(parse_config(j, false));
  j["trials"] = 7;
  const auto large = run_experiment(parse_config(j, false));
  for (std::size_t c = 0; c < small.cells.size(); ++c)
    for (std::size_t t = 0; t < 4; ++t)
      EXPECT_EQ(*small.cells[c].estimates[t], *large.cells[c].estimates[t]);
}

TEST(Experiment, NoiselessModelHasZeroVariance) {
  auto j = base_config();
  j["model"] = json::parse(R"({"dim": 1, "drift": [{"1": 0.3}], "diffusion": [[{}]]})");
  j["drift_dictionary"] = "monomial:0";
  j["methods"] = {"drift_fd1"};
  j["trials"] = 2;
  j["dt_values"] = {0.01};
  j["T_values"] = {10};
  // Initial states differ per trial, so agreement is up to roundoff.
  const auto res = run_experiment(parse_config(j, false));
  EXPECT_NEAR((*res.cells[0].estimates[0])(0, 0), (*res.cells[0].estimates[1])(0, 0), 1e-12);
  EXPECT_LE(res.reports[0].err_var, 1e-24);
}

TEST(Experiment, SingularCellsAreRecorded) {
  // A motionless path makes the columns 1 and x collinear.
  auto j = base_config();
  j["model"] = json::parse(R"({"dim": 1, "drift": [{"x": 1e-300}], "diffusion": [[{}]]})");
  j["drift_dictionary"] = "monomial:1";
  j["methods"] = {"drift_fd1"};
  const auto res = run_experiment(parse_config(j, false));
  for (const auto& r : res.reports) {
    EXPECT_EQ(r.diverged, 4);
    EXPECT_EQ(r.trials, 0);
    EXPECT_TRUE(std::isnan(r.err_mean));
  }
  EXPECT_NE(res.cells[0].failures[0].find("singular"), std::string::npos);
}

TEST(Experiment, DivergedTrialsExcluded) {
  auto j = base_config();
  j["model"] = json::parse(R"({"dim": 1, "drift": [{"x^3": 1.0}], "diffusion": [[{"1": 1.0}]]})");
  j["drift_dictionary"] = "monomial:3";
  j["methods"] = {"drift_fd1"};
  const auto res = run_experiment(parse_config(j, false));
  for (const auto& r : res.reports) EXPECT_EQ(r.diverged, 4);
  EXPECT_NE(res.cells[0].failures[0].find("diverged"), std::string::npos);
}

TEST(Experiment, OrnsteinUhlenbeckSanity) {
  auto j = base_config();
  j["model"] = json::parse(R"({"dim": 1, "drift": [{"x": -1.0}], "diffusion": [[{"1": 1.0}]]})");
  j["drift_dictionary"] = "monomial:3";
  j["diffusion_dictionary"] = "monomial:3";
  j["dt_values"] = {0.01};
  j["T_values"] = {5000};
  j["trials"] = 100;
  j["methods"] = {"drift_fd1"};
  const auto res = run_experiment(parse_config(j, false));
  EXPECT_LE(res.reports[0].err_mean, 0.05);
}

TEST(Csv, HeaderAndRow) {
  const auto dir = temp_dir("csv1");
  emit_csv({report("drift_fd1", Target::drift, 0.002, 500, 0.5, 1e-5)}, dir / "r.csv");
  EXPECT_EQ(slurp(dir / "r.csv"),
            "method,target,dt,T,trials,diverged,err_mean,err_var\n"
            "drift_fd1,drift,0.002,500,10,0,0.5,1e-5\n");
}

TEST(Csv, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(0.1 + 0.2), "0.30000000000000004");
  EXPECT_EQ(format_double(2e-4), "2e-4");
  EXPECT_EQ(format_double(1e20), "1e20");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  for (double v : {1.0 / 3.0, 1e-300, 12345.678, -7e-12})
    EXPECT_EQ(parse_double(format_double(v)), v);
}

TEST(Csv, ReEmissionIsByteIdenticalAndReadable) {
  const auto dir = temp_dir("csv2");
  std::vector<ErrorReport> reps{report("a", Target::drift, 0.01, 10, 1.0 / 3.0, 2.0 / 7.0),
                                report("b", Target::diffusion, 0.02, 20, std::nan(""), 0.1)};
  emit_csv(reps, dir / "x.csv");
  emit_csv(reps, dir / "y.csv");
  EXPECT_EQ(slurp(dir / "x.csv"), slurp(dir / "y.csv"));
  const auto back = read_csv(dir / "x.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].err_mean, 1.0 / 3.0);
  EXPECT_EQ(back[1].target, Target::diffusion);
  EXPECT_TRUE(std::isnan(back[1].err_mean));
  EXPECT_THROW(emit_csv({}, dir / "z.csv"), InvalidArgument);
  EXPECT_THROW(emit_csv(reps, dir / "missing" / "z.csv"), Error);
}

TEST(PlotData, SingleTRefusesVarianceVsT) {
  const auto dir = temp_dir("plot1");
  std::vector<ErrorReport> reps;
  for (double dt : {0.002, 0.004, 0.008, 0.016, 0.032})
    reps.push_back(report("drift_fd1", Target::drift, dt, 500, dt, dt * dt));
  const auto out = emit_plot_data(reps, (dir / "p").string(), 0.004);
  EXPECT_EQ(out.written.size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(dir / "p_drift_mean_vs_dt.tsv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "p_drift_var_vs_dt.tsv"));
  EXPECT_FALSE(std::filesystem::exists(dir / "p_drift_var_vs_T.tsv"));
  ASSERT_EQ(out.skipped.size(), 1u);
  EXPECT_NE(out.skipped[0].find("var-vs-T"), std::string::npos);
}

TEST(PlotData, ShapeAndColumnOrder) {
  const auto dir = temp_dir("plot2");
  std::vector<ErrorReport> reps;
  for (const char* m : {"zeta", "alpha"})
    for (double dt : {0.04, 0.01, 0.02}) reps.push_back(report(m, Target::drift, dt, 100, dt, 0.1));
  emit_plot_data(reps, (dir / "p").string(), 0.01);
  EXPECT_EQ(slurp(dir / "p_drift_mean_vs_dt.tsv"),
            "dt\tzeta\talpha\n0.01\t0.01\t0.01\n0.02\t0.02\t0.02\n0.04\t0.04\t0.04\n");
}

TEST(PlotData, VarianceAgainstTAtFixedDt) {
  const auto dir = temp_dir("plot3");
  std::vector<ErrorReport> reps;
  for (double T : {100.0, 200.0})
    for (double dt : {0.01, 0.02}) reps.push_back(report("m", Target::diffusion, dt, T, 1.0, dt / T));
  emit_plot_data(reps, (dir / "p").string(), 0.02);
  EXPECT_EQ(slurp(dir / "p_diffusion_var_vs_T.tsv"), "T\tm\n100\t2e-4\n200\t1e-4\n");
  EXPECT_EQ(slurp(dir / "p_diffusion_var_vs_dt.tsv"), "dt\tm\n0.01\t5e-5\n0.02\t1e-4\n");
}

TEST(PlotData, NoCoverageIsAnError) {
  const auto dir = temp_dir("plot4");
  try {
    emit_plot_data({report("m", Target::drift, 0.01, 10, 1, 1)}, (dir / "p").string(), 0.01);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("dt values"), std::string::npos);
  }
}
