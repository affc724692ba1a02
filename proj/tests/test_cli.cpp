#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kData = MPLEX_DATA_DIR;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("mplex_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs the tool with stdout/stderr captured into the scratch directory.
  int run(const std::string& args) {
    const std::string cmd = std::string("\"") + MPLEX_CLI + "\" " + args + " > \"" + (dir_ / "stdout.txt").string() +
                            "\" 2> \"" + (dir_ / "stderr.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string out(const std::string& sub) const { return "--out-dir \"" + (dir_ / sub).string() + "\""; }
  std::string data(const std::string& name) const { return "\"" + kData + "/" + name + "\""; }

  std::string text(const fs::path& p) const {
    std::ifstream in(dir_ / p);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }
  json load(const fs::path& p) const { return json::parse(text(p)); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, RateExitCodes) {
  EXPECT_EQ(run("rate --sigma-bar 2 --sigma-under 1 --tau-max 1"), 0);
  EXPECT_NE(text("stdout.txt").find("0.442854401002"), std::string::npos);
  EXPECT_EQ(run("rate --sigma-bar 1 --sigma-under 2 --tau-max 1"), 1);
  EXPECT_EQ(run("rate --sigma-bar 2 --sigma-under 1 --tau-max -1"), 2);
  EXPECT_EQ(run("rate --sigma-bar 2"), 2);
  EXPECT_EQ(run(""), 2);
}

TEST_F(Cli, CertifyFeasibleAndInfeasible) {
  const std::string design = data("mtdc_design.json"), tr = data("mtdc_transform.json"), norm = data("norm_uniform.json");
  EXPECT_EQ(run("certify " + design + " " + tr + " " + norm + " " + out("a")), 0);
  const json cert = load("a/certificate.json");
  EXPECT_TRUE(cert["feasible"].get<bool>());
  EXPECT_NEAR(cert["lambda"].get<double>(), 0.012540549125, 1e-11);
  const json man = load("a/manifest.json");
  EXPECT_EQ(man["command"], "certify");
  EXPECT_EQ(man["exit_code"], 0);
  EXPECT_EQ(man["inputs"].size(), 3u);
  EXPECT_TRUE(man["seed"].is_null());

  EXPECT_EQ(run("certify " + data("mtdc_physical.json") + " " + tr + " " + norm + " " + out("b")), 1);
  EXPECT_FALSE(load("b/certificate.json")["feasible"].get<bool>());
  EXPECT_NE(text("stdout.txt").find("C2 violated"), std::string::npos);
  EXPECT_EQ(load("b/manifest.json")["exit_code"], 1);

  EXPECT_EQ(run("certify " + data("toy_network.json") + " " + data("toy_transform.json") + " " + norm + " " + out("c")), 0);
  EXPECT_EQ(run("certify " + data("toy_network.json") + " " + data("identity_transform.json") + " " + norm + " " +
                out("d")),
            1);
}

TEST_F(Cli, InputErrorsExitTwo) {
  const std::string tr = data("identity_transform.json"), norm = data("norm_uniform.json");
  EXPECT_EQ(run("certify " + data("malformed.json") + " " + tr + " " + norm + " " + out("e")), 2);
  EXPECT_NE(text("stderr.txt").find("malformed.json:4:1"), std::string::npos) << text("stderr.txt");
  EXPECT_FALSE(fs::exists(dir_ / "e/manifest.json"));
  EXPECT_EQ(run("certify " + data("no_such_file.json") + " " + tr + " " + norm), 2);
  // MTDC network with a linear transform of the wrong size.
  EXPECT_EQ(run("certify " + data("mtdc_design.json") + " " + data("toy_transform.json") + " " + norm + " " + out("f")),
            2);
  EXPECT_EQ(run("mtdc --terminals 2 " + out("g")), 2);
  EXPECT_EQ(run("bogus"), 2);
}

TEST_F(Cli, SynthWritesGainsAndCertificate) {
  EXPECT_EQ(run("synth " + data("mtdc_search.json") + " " + out("s")), 0);
  const json g = load("s/gains.json");
  EXPECT_TRUE(g["feasible"].get<bool>());
  EXPECT_TRUE(g["certified"].get<bool>());
  EXPECT_EQ(g["gains"]["k1"], 2.25);
  EXPECT_EQ(g["grid"].size(), 49u);
  EXPECT_TRUE(load("s/certificate.json")["feasible"].get<bool>());
  EXPECT_EQ(load("s/manifest.json")["outputs"], json({"gains.json", "certificate.json"}));
}

TEST_F(Cli, SimulateWritesTraceAndMetrics) {
  EXPECT_EQ(run("simulate " + data("toy_network.json") + " " + data("toy_sim.json") + " " + out("t")), 0);
  const std::string csv = text("t/trace.csv");
  EXPECT_EQ(csv.rfind("t,x0_0,x1_0,x2_0,r1_0_0,r1_1_0,r1_2_0,u0_0,u1_0,u2_0,y_err\n", 0), 0u);
  std::size_t lines = 0;
  for (char ch : csv) lines += ch == '\n';
  EXPECT_EQ(lines, 1u + 201u);  // header, every 100th of 20001 points
  const json m = load("t/metrics.json");
  EXPECT_EQ(m["mesh_points"], 20001);
  EXPECT_LT(m["metrics"]["final_error"].get<double>(), 1e-3);
  EXPECT_EQ(load("t/manifest.json")["seed"], 7);
}

TEST_F(Cli, MtdcShortRunFailsAcceptance) {
  EXPECT_EQ(run("mtdc --gains-file " + data("reported_gains.json") + " --terminals 6 --horizon 3 --tail-window 1 " +
                out("m")),
            1);
  const json r = load("m/report.json");
  EXPECT_FALSE(r["passed"].get<bool>());
  EXPECT_EQ(r["gains_source"], "file");
  EXPECT_FALSE(r["physical_certificate"]["feasible"].get<bool>());
  EXPECT_TRUE(fs::exists(dir_ / "m/trace.csv"));
  EXPECT_EQ(load("m/manifest.json")["exit_code"], 1);
}

TEST_F(Cli, MtdcFullRunPasses) {
  EXPECT_EQ(run("mtdc --gains-file " + data("reported_gains.json") + " " + out("full")), 0);
  const json r = load("full/report.json");
  EXPECT_TRUE(r["passed"].get<bool>());
  EXPECT_EQ(r["checks"].size(), 6u);
  EXPECT_EQ(load("full/gains.json")["alpha"], -0.5);
  EXPECT_EQ(load("full/manifest.json")["seed"], 1);
}
