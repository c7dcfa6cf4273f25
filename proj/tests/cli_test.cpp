#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "json.hpp"

#include "hmmcd/shewhart_discrete.hpp"
#include "hmmcd/shewhart_gaussian.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(HMMCD_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "hmmcd_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

const std::string kSample = std::string(HMMCD_SAMPLES) + "/three_state.json";

}  // namespace

TEST(Cli, CalibrateDefaultsMatchLibrary) {
  const auto r = run("calibrate");
  ASSERT_EQ(r.code, 0);
  const auto doc = json::parse(r.out);
  const auto& res = doc["results"][0];
  EXPECT_EQ(res["gamma"].get<double>(), 1000.0);
  EXPECT_NEAR(res["nu1"].get<double>(), 4.59023247359, 1e-10);
  EXPECT_NEAR(res["nu2"].get<double>(), 3.29052673149, 1e-10);
  EXPECT_NEAR(res["beta2"].get<double>(), 0.00721609061819, 1e-13);
  EXPECT_NEAR(res["prior"]["support"][0].get<double>(), -1.0, 1e-15);
  EXPECT_EQ(doc["config"]["seed"].get<int>(), 42);
  EXPECT_EQ(doc["config"]["gaussian"]["alpha"].get<double>(), 0.5);
}

TEST(Cli, Figure1CsvSchema) {
  const auto out = scratch("fig.csv");
  const auto r = run("figure1 --gamma 2:1000:25 --out " + out.string());
  ASSERT_EQ(r.code, 0);
  std::istringstream in(slurp(out));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "gamma,nu1,nu2,beta1,beta2,beta1_tilde,beta2_tilde");
  const hmmcd::GaussianAr1Model m({0.5, 1.0, 0.5});
  int rows = 0, comments = 0;
  double prev_gamma = 0;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) {
      ++comments;
      continue;
    }
    double v[7];
    ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf", &v[0], &v[1], &v[2], &v[3], &v[4], &v[5],
                          &v[6]),
              7)
        << line;
    EXPECT_GT(v[0], prev_gamma);
    prev_gamma = v[0];
    const auto s1 = hmmcd::make_s1(m, v[0]);
    const auto w = hmmcd::solve_worst_case_prior(m, v[0]);
    EXPECT_NEAR(v[3], hmmcd::beta1(m, s1), 1e-9 * v[3]);
    EXPECT_NEAR(v[4], w.prior.beta2, 1e-9 * v[4]);
    for (int k = 3; k < 7; ++k) {
      EXPECT_GT(v[k], 0.0);
      EXPECT_LE(v[k], 1.0);
    }
    ++rows;
  }
  EXPECT_EQ(rows, 25);
  EXPECT_EQ(comments, 2);
  EXPECT_NEAR(prev_gamma, 1000.0, 1e-9);
}

TEST(Cli, Figure1NeedsTwoPoints) { EXPECT_EQ(run("figure1 --gamma 10 --out -").code, 2); }

TEST(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run("calibrate --alpha 1.5").code, 2);
  EXPECT_EQ(run("calibrate --sigma2 -1").code, 2);
  EXPECT_EQ(run("calibrate --gamma 0.5").code, 2);
  EXPECT_EQ(run("calibrate --gamma abc").code, 2);
  EXPECT_EQ(run("calibrate --no-such-flag").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("simulate --trials 100").code, 2);
  EXPECT_EQ(run("simulate --adversary psychic --trials 10000").code, 2);
  EXPECT_EQ(run("calibrate", "HMMCD_SEED=notanumber").code, 2);

  const auto bad = scratch("bad_model.json");
  std::ofstream(bad) << R"({"pre_obs": [0.5, 0.6], "post_obs": [[0.5, 0.5]], "pre_trans": [[1]],
                           "post_trans": [[1]], "stationary": [1]})";
  EXPECT_EQ(run("calibrate --model " + bad.string()).code, 2);
  const auto cfg = scratch("bad_cfg.json");
  std::ofstream(cfg) << R"({"gama": 10})";
  EXPECT_EQ(run("calibrate --config " + cfg.string()).code, 2);
}

TEST(Cli, IoErrorsExitThree) {
  EXPECT_EQ(run("figure1 --out /nonexistent-dir/x.csv").code, 3);
  EXPECT_EQ(run("calibrate --model /nonexistent-dir/model.json").code, 3);
  EXPECT_EQ(run("calibrate --config /nonexistent-dir/cfg.json").code, 3);
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(run("--help").code, 0); }

TEST(Cli, ConfigFileWithFlagOverride) {
  const auto cfg = scratch("cfg.json");
  std::ofstream(cfg) << R"({"gamma": [10, 100], "alpha": 0.3, "seed": 7})";
  const auto r = run("calibrate --config " + cfg.string() + " --alpha 0.5");
  ASSERT_EQ(r.code, 0);
  const auto doc = json::parse(r.out);
  EXPECT_EQ(doc["config"]["gaussian"]["alpha"].get<double>(), 0.5);
  EXPECT_EQ(doc["config"]["seed"].get<int>(), 7);
  EXPECT_EQ(doc["results"].size(), 2u);
  EXPECT_NEAR(doc["results"][1]["nu2"].get<double>(), 2.57582930355, 1e-10);
}

TEST(Cli, SeedFromEnvironmentUnlessFlagGiven) {
  EXPECT_EQ(json::parse(run("calibrate", "HMMCD_SEED=9").out)["config"]["seed"].get<int>(), 9);
  EXPECT_EQ(json::parse(run("calibrate --seed 3", "HMMCD_SEED=9").out)["config"]["seed"].get<int>(), 3);
}

TEST(Cli, DiscreteSolverAgreesWithOracle) {
  const auto lp = run("calibrate --model " + kSample + " --gamma 10,20,50");
  const auto en = run("calibrate --oracle --model " + kSample + " --gamma 10,20,50");
  ASSERT_EQ(lp.code, 0);
  ASSERT_EQ(en.code, 0);
  const auto a = json::parse(lp.out), b = json::parse(en.out);
  EXPECT_EQ(a["solver"], "linear_program");
  EXPECT_EQ(b["solver"], "enumeration");
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& x = a["results"][i];
    const auto& y = b["results"][i];
    EXPECT_NEAR(x["beta2"].get<double>(), y["beta2"].get<double>(), 1e-12);
    EXPECT_EQ(x["prior"]["support"], y["prior"]["support"]);
    EXPECT_EQ(x["prior"]["support"].size(), 2u);
  }
}

TEST(Cli, SimulateIsDeterministicAndPasses) {
  const std::string args = "simulate --gamma 20 --trials 20000 --seed 5 --detector s2 --adversary state --eps 0.05";
  const auto a = run(args);
  const auto b = run(args);
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  const auto doc = json::parse(a.out);
  const auto& res = doc["results"][0];
  EXPECT_NEAR(res["z_star"].get<double>(), -1.0, 1e-14);
  const hmmcd::GaussianAr1Model m({0.5, 1.0, 0.5});
  EXPECT_NEAR(res["detection"]["reference"].get<double>(), hmmcd::solve_worst_case_prior(m, 20).prior.beta2, 1e-14);
  EXPECT_EQ(res["detection"]["method"], "first hit of the state band");
  EXPECT_GT(res["detection"]["conditioning_count"].get<int>(), 100);
  const auto c = run("simulate --gamma 20 --trials 20000 --seed 6 --detector s2 --adversary state --eps 0.05");
  EXPECT_NE(c.out, a.out);
}

TEST(Cli, SimulateS1AgainstStateUsesImportanceSampling) {
  const auto r = run("simulate --gamma 20 --trials 20000 --detector s1 --adversary state");
  ASSERT_EQ(r.code, 0);
  const auto res = json::parse(r.out)["results"][0];
  EXPECT_EQ(res["detection"]["method"], "importance-sampled z_1 in the state band");
  EXPECT_NEAR(res["z_star"].get<double>(), -4.0, 1e-14);
}

TEST(Cli, SimulateDiscreteModel) {
  const auto r = run("simulate --model " + kSample + " --gamma 10 --trials 20000 --adversary state");
  ASSERT_EQ(r.code, 0);
  const auto doc = json::parse(r.out);
  const hmmcd::DiscreteChangeModel m(hmmcd::load_discrete_model(kSample));
  EXPECT_NEAR(doc["results"][0]["detection"]["reference"].get<double>(),
              hmmcd::solve_worst_case_prior(m, 10).prior.beta2, 1e-12);
}

TEST(Cli, TooFewSurvivorsExitFour) {
  // With gamma near 1 almost every run alarms before the state reaches the band.
  EXPECT_EQ(run("simulate --gamma 1.01 --trials 10000 --detector s2 --adversary state").code, 4);
}
