#include <cstdlib>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include "semilab/report.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string command = std::string("\"") + SEMILAB_CLI + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("semilab_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string scenario(const std::string& name) { return std::string(SEMILAB_SCENARIOS) + "/" + name; }

}  // namespace

TEST(Cli, AllPassExitsZero) {
  const auto out = scratch("pass");
  EXPECT_EQ(run("verify --config " + scenario("smallest.json") + " --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "report.json"));
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
  EXPECT_EQ(run("report --out " + out.string()), 0);
}

TEST(Cli, FailingCheckExitsOne) {
  const auto out = scratch("fail");
  const fs::path config = out / "config.json";
  semilab::write_text(config, R"({"schema": "semilab.scenario/1",
    "model": {"dim": 1, "A": [[0.0]], "Q": [[1.0]]},
    "run": {"seed": 1, "instances": 5, "tolerances": {"generator/quotient": 0.0}},
    "suites": ["generator"]})");
  EXPECT_EQ(run("verify --config " + config.string() + " --out " + (out / "o").string()), 1);
}

TEST(Cli, ConfigErrorExitsTwo) {
  const auto out = scratch("config");
  const fs::path config = out / "bad.json";
  semilab::write_text(config, R"({"schema": "semilab.scenario/1", "model": {"dim": 0}})");
  EXPECT_EQ(run("verify --config " + config.string() + " --out " + (out / "o").string()), 2);
  EXPECT_EQ(run("verify --config " + (out / "missing.json").string()), 2);
  EXPECT_EQ(run("verify --no-such-flag"), 2);
}

TEST(Cli, EvolveAndResolvent) {
  const auto out = scratch("evolve");
  const fs::path config = out / "config.json";
  semilab::write_text(config, R"({"schema": "semilab.scenario/1",
    "model": {"dim": 2, "A": [[-1.0, 0.2], [0.0, -0.5]], "Q": [[1.0, 0.0], [0.0, 0.5]]},
    "run": {"seed": 4, "particles": 2000, "t_steps": 8, "lambda": 1.0}})");
  EXPECT_EQ(run("evolve --config " + config.string() + " --out " + (out / "e").string()), 0);
  EXPECT_TRUE(fs::exists(out / "e" / "moments.csv"));
  EXPECT_TRUE(fs::exists(out / "e" / "manifest.json"));
  EXPECT_EQ(run("resolvent --config " + config.string() + " --out " + (out / "r").string()), 0);
  EXPECT_TRUE(fs::exists(out / "r" / "resolvent.json"));
}

TEST(Cli, SeedOverrideChangesReport) {
  const auto a = scratch("seed_a"), b = scratch("seed_b"), c = scratch("seed_c");
  ASSERT_EQ(run("verify ou-exact --config " + scenario("smallest.json") + " --seed 5 --threads 1 --out " + a.string()), 0);
  ASSERT_EQ(run("verify ou-exact --config " + scenario("smallest.json") + " --seed 5 --threads 3 --out " + b.string()), 0);
  ASSERT_EQ(run("verify ou-exact --config " + scenario("smallest.json") + " --seed 6 --out " + c.string()), 0);
  EXPECT_EQ(semilab::read_text(a / "report.json"), semilab::read_text(b / "report.json"));
  EXPECT_NE(semilab::read_text(a / "report.json"), semilab::read_text(c / "report.json"));
}
