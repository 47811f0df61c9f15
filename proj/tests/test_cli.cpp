#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "platoon/cli.hpp"

using namespace platoon;
namespace fs = std::filesystem;

namespace {

std::string config(const std::string& name) {
  const char* d = std::getenv("PLATOON_CONFIG_DIR");
  return std::string(d ? d : "configs") + "/" + name + ".json";
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("platoon_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string out_dir(const std::string& sub = "") const { return (dir_ / sub).string(); }
  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SimulateUndefendedCrashExitsTwo) {
  const auto r = run({"simulate", "--config", config("attack_undefended"), "--out", out_dir()});
  EXPECT_EQ(r.code, kExitDomain) << r.err;
  const auto m = nlohmann::json::parse(slurp(dir_ / "metrics.json"));
  EXPECT_TRUE(m["collision"].get<bool>());
  EXPECT_TRUE(fs::exists(dir_ / "trace.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "spacing.dat"));
  EXPECT_TRUE(fs::exists(dir_ / "velocity.dat"));
}

TEST_F(CliTest, SimulateDefendedExitsZero) {
  const auto r = run({"simulate", "--config", config("attack_defended"), "--out", out_dir()});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  const auto m = nlohmann::json::parse(slurp(dir_ / "metrics.json"));
  EXPECT_FALSE(m["collision"].get<bool>());
  EXPECT_LT(std::abs(m["final_spacing_error"][2].get<double>()), 0.1);
}

TEST_F(CliTest, SimulateIsIdempotent) {
  const std::vector<std::string> files{"trace.csv", "metrics.json", "spacing.dat", "velocity.dat", "modes.csv"};
  ASSERT_EQ(run({"simulate", "--config", config("attack_noisy_detector"), "--out", out_dir("a"), "--seed", "9"}).code,
            kExitDomain);
  ASSERT_EQ(run({"simulate", "--config", config("attack_noisy_detector"), "--out", out_dir("b"), "--seed", "9"}).code,
            kExitDomain);
  for (const auto& f : files) EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  const auto header = slurp(dir_ / "a" / "trace.csv").substr(0, 60);
  EXPECT_EQ(header.rfind("t,x1,v1,u1,x2,v2,u2,eps2,mode2,xi2,", 0), 0u);
}

TEST_F(CliTest, MissingConfigFileExitsOne) {
  const auto r = run({"simulate", "--config", "/nonexistent.json", "--out", out_dir()});
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("cannot open"), std::string::npos);
}

TEST_F(CliTest, MalformedConfigReportsLocation) {
  fs::create_directories(dir_);
  const auto bad = dir_ / "bad.json";
  std::ofstream(bad) << "{\n  \"game\": {\"utilities\": [[1, 2]]}\n}\n";
  const auto r = run({"game", "--config", bad.string(), "--out", out_dir()});
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("/game/utilities"), std::string::npos);
  std::ofstream(bad) << "{\n  \"step\": 0.01,,\n}\n";
  const auto s = run({"simulate", "--config", bad.string(), "--out", out_dir()});
  EXPECT_EQ(s.code, kExitInput);
  EXPECT_NE(s.err.find(":2:16"), std::string::npos) << s.err;
}

TEST_F(CliTest, BadFlagsExitOne) {
  EXPECT_EQ(run({}).code, kExitInput);
  EXPECT_EQ(run({"simulate"}).code, kExitInput);
  EXPECT_EQ(run({"launch", "--config", config("game_default")}).code, kExitInput);
  EXPECT_EQ(run({"game", "--config", config("game_default"), "--tol", "-1"}).code, kExitInput);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST_F(CliTest, StabilityFixedPPasses) {
  const auto r = run({"stability", "--config", config("stability_fixed_p"), "--out", out_dir()});
  EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(dir_ / "stability.json"));
  EXPECT_NEAR(j["certificate"]["residual_max_eigenvalues"][0].get<double>(), -0.0217, 1e-4);
  EXPECT_FALSE(j["cacc"]["real_poles"].get<bool>());
}

TEST_F(CliTest, StabilitySearchFindsP) {
  const auto r = run({"stability", "--config", config("stability_search"), "--out", out_dir()});
  EXPECT_EQ(r.code, kExitOk) << r.out;
  EXPECT_NE(r.out.find("(search)"), std::string::npos);
}

TEST_F(CliTest, StabilityUnstableGainsNameInequality) {
  fs::create_directories(dir_);
  const auto cfg = dir_ / "unstable.json";
  std::ofstream(cfg) << R"({"gains": {"cacc": {"k1": 0.4, "k2": -2.51}}, "lyapunov": {"p11": 1, "p12": 0.154297, "p22": 1.57813}})";
  const auto r = run({"stability", "--config", cfg.string(), "--out", out_dir()});
  EXPECT_EQ(r.code, kExitDomain);
  EXPECT_NE(r.out.find("first failed inequality: k1 < 0"), std::string::npos) << r.out;
}

TEST_F(CliTest, StabilitySearchBudgetExhausted) {
  fs::create_directories(dir_);
  const auto cfg = dir_ / "none.json";
  std::ofstream(cfg) << R"({"gains": {"acc": {"alpha": 0.3}}, "stability": {"grid": 5, "refinements": 0}})";
  const auto r = run({"stability", "--config", cfg.string(), "--out", out_dir()});
  EXPECT_EQ(r.code, kExitDomain);
  EXPECT_NE(r.out.find("no certificate found"), std::string::npos);
}

TEST_F(CliTest, GameDefault) {
  const auto r = run({"game", "--config", config("game_default"), "--out", out_dir()});
  EXPECT_EQ(r.code, kExitOk) << r.out;
  EXPECT_NE(r.out.find("P(r|attack) = 0.7, P(r|no attack) = 0.1"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(dir_ / "game.json"));
  EXPECT_NEAR(j["equilibria"][0]["p_attack"].get<double>(), 39.0 / 47.0, 1e-12);
  EXPECT_TRUE(j["verified"].get<bool>());
}

TEST_F(CliTest, GameDominance) {
  fs::create_directories(dir_);
  const auto cfg = dir_ / "dom.json";
  std::ofstream(cfg) << R"({"game": {"utilities": [[9,0],[9,0],[9,0],[9,0],[0,0],[0,1],[0,0],[0,1]]}})";
  const auto r = run({"game", "--config", cfg.string(), "--out", out_dir()});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("P(attack) = 1,"), std::string::npos) << r.out;
}

TEST_F(CliTest, StringCheckAccFails) {
  const auto r = run({"string-check", "--config", config("string_check_acc"), "--out", out_dir()});
  EXPECT_EQ(r.code, kExitDomain);
  EXPECT_NE(r.out.find("||H||_inf = 1.1547"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("string stable: no"), std::string::npos);
}

TEST_F(CliTest, StringCheckLagPasses) {
  const auto r = run({"string-check", "--config", config("string_check_lag"), "--out", out_dir()});
  EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
  EXPECT_NE(r.out.find("H(s) = (1) / (s + 1)"), std::string::npos) << r.out;
}

TEST_F(CliTest, StringCheckUnstableExitsOne) {
  fs::create_directories(dir_);
  const auto cfg = dir_ / "unstable.json";
  std::ofstream(cfg) << R"({"string_check": {"transfer_function": {"numerator": [1], "denominator": [-1, 1]}}})";
  EXPECT_EQ(run({"string-check", "--config", cfg.string(), "--out", out_dir()}).code, kExitInput);
  std::ofstream(cfg) << R"({"gains": {"acc": {"alpha": 0.25}}})";
  EXPECT_EQ(run({"string-check", "--config", cfg.string(), "--out", out_dir()}).code, kExitInput);
}

TEST_F(CliTest, SweepWritesGridDeterministically) {
  ASSERT_EQ(run({"sweep", "--config", config("sweep"), "--out", out_dir("a")}).code, kExitOk);
  ASSERT_EQ(run({"sweep", "--config", config("sweep"), "--out", out_dir("b")}).code, kExitOk);
  const auto a = slurp(dir_ / "a" / "sweep.csv");
  EXPECT_EQ(a, slurp(dir_ / "b" / "sweep.csv"));
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 21);
}

TEST_F(CliTest, OutputDirFromEnvironment) {
  ::setenv(kOutDirEnv, out_dir("env").c_str(), 1);
  const auto r = run({"game", "--config", config("game_default")});
  ::unsetenv(kOutDirEnv);
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_TRUE(fs::exists(dir_ / "env" / "game.json"));
}
