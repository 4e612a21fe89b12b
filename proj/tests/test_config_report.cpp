#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "semilab/config.hpp"
#include "semilab/errors.hpp"
#include "semilab/harness.hpp"
#include "semilab/report.hpp"
#include "semilab/suites.hpp"

using namespace semilab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("semilab_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Config, RoundTripFixedPoint) {
  for (const auto& entry : fs::directory_iterator(SEMILAB_SCENARIOS)) {
    const ScenarioConfig first = load_config(entry.path().string());
    const std::string text = serialize_config(first);
    const std::string again = serialize_config(parse_config(text));
    EXPECT_EQ(text, again) << entry.path();
  }
}

TEST(Config, PresetsAndDefaults) {
  const auto config = parse_config(R"({"schema": "semilab.scenario/1",
    "model": {"dim": 3, "A": {"preset": "heat", "scale": 0.1}, "Q": {"preset": "diagonal", "values": [1, 2, 3]}},
    "suites": ["covariance"]})");
  EXPECT_EQ(config.model.dim, 3);
  EXPECT_EQ(config.run.seed, 1u);
  const auto model = build_model(config.model);
  EXPECT_NEAR(model.A().matrix()(1, 1), -0.1 * 4 * M_PI * M_PI, 1e-12);
  EXPECT_EQ(model.Q().matrix()(2, 2), 3.0);
  EXPECT_TRUE(model.is_ou());
}

TEST(Config, ErrorCarriesFieldAndLine) {
  const std::string text = "{\n  \"schema\": \"semilab.scenario/1\",\n  \"model\": {\"dim\": 2, \"A\": [[0,0],[0,0]], "
                           "\"Q\": [[1,0],[0,1]]},\n  \"run\": {\"particles\": 100000000}\n}\n";
  try {
    parse_config(text);
    FAIL() << "expected a config error";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "run.particles");
    EXPECT_EQ(e.line(), 4);
  }
}

TEST(Config, RejectsUnknownFieldsAndSuites) {
  EXPECT_THROW(parse_config(R"({"schema": "semilab.scenario/1", "model": {"dim": 1, "A": [[0]], "Q": [[1]]},
                                "suites": ["no-such-suite"]})"),
               ConfigError);
  EXPECT_THROW(parse_config(R"({"schema": "semilab.scenario/1", "model": {"dim": 1, "A": [[0]], "Q": [[1]], "extra": 1}})"),
               ConfigError);
  EXPECT_THROW(parse_config(R"({"schema": "semilab.scenario/1", "model": {"dim": 65}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"schema": "other/1", "model": {"dim": 1}})"), ConfigError);
  EXPECT_THROW(parse_config("{\"schema\": "), ConfigError);
  EXPECT_THROW(parse_config(R"({"schema": "semilab.scenario/1", "model": {"dim": 1, "A": [[0]], "Q": [[1]],
                                "drift": {"preset": "cubic"}}})"),
               ConfigError);
}

TEST(Suites, FixedOrder) {
  const auto& names = suite_names();
  ASSERT_EQ(names.size(), 12u);
  EXPECT_EQ(names.front(), "ou-exact");
  EXPECT_EQ(names.back(), "bernstein-cesaro");
  EXPECT_TRUE(is_suite_name("duality"));
  EXPECT_FALSE(is_suite_name("bogus"));
}

TEST(Scenario, SmallestPasses) {
  auto config = load_config(std::string(SEMILAB_SCENARIOS) + "/smallest.json");
  const auto report = run_scenario(config);
  ASSERT_FALSE(report.checks.empty());
  EXPECT_TRUE(report.all_pass());
  EXPECT_EQ(exit_code(report), kAllPass);
}

TEST(Scenario, DeterministicReport) {
  auto config = load_config(std::string(SEMILAB_SCENARIOS) + "/smallest.json");
  config.run.samples = 20000;
  const std::string a = to_json(run_scenario(config)).dump(2);
  const std::string b = to_json(run_scenario(config)).dump(2);
  EXPECT_EQ(a, b);
}

TEST(Report, JsonRoundTrip) {
  VerificationReport report;
  report.config_digest = sha256_hex("x");
  report.seed = 7;
  CheckRecord a;
  a.identity = "suite/a";
  a.paper_ref = "f = g";
  a.residual = 0.1 + 0.2;
  a.tolerance = std::numeric_limits<double>::infinity();
  a.stderr = 1e-3;
  a.pass = true;
  a.seed = 3;
  report.checks.push_back(a);
  const auto back = report_from_json(nlohmann::json::parse(to_json(report).dump()));
  ASSERT_EQ(back.checks.size(), 1u);
  EXPECT_EQ(back.checks[0].residual, a.residual);
  EXPECT_TRUE(std::isinf(back.checks[0].tolerance));
  EXPECT_EQ(*back.checks[0].stderr, 1e-3);
  EXPECT_EQ(to_json(back).dump(), to_json(report).dump());
  EXPECT_FALSE(to_json(report).dump().find("runtime") != std::string::npos);
}

TEST(Report, EmptyPlotdataIsHeaderOnly) {
  const auto dir = scratch("empty");
  const auto files = emit_plotdata(VerificationReport{}, dir);
  ASSERT_EQ(files.size(), 1u);
  EXPECT_EQ(read_text(files[0]), "identity,residual,tolerance,stderr,pass\n");
}

TEST(Report, GeneratorSeriesColumns) {
  VerificationReport report;
  CheckRecord c;
  c.identity = "generator/quotient";
  c.series = Series{{"t", "quotient", "closed_form", "abs_error"}, {{1e-3, 0.5, 0.49, 0.01}}};
  report.checks.push_back(c);
  const auto dir = scratch("series");
  emit_plotdata(report, dir);
  const std::string text = read_text(dir / "generator_quotient.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,quotient,closed_form,abs_error");
}

TEST(Report, TrajectoryMoments) {
  Matrix p(2, 1);
  p << 1.0, 3.0;
  MeasureTrajectory traj{{0.0, 1.0}, {ParticleMeasure::empirical(p), ParticleMeasure::empirical(p * 2)}, "h", 0};
  const auto dir = scratch("traj");
  emit_plotdata(traj, dir / "moments.csv");
  EXPECT_EQ(read_text(dir / "moments.csv"), "t,mean_1,second_1\n0,2,5\n1,4,20\n");
}

TEST(Report, UnwritablePath) {
  EXPECT_THROW(emit_plotdata(VerificationReport{}, "/proc/semilab/nope"), IoError);
}

TEST(Sha256, KnownDigests) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Outputs, ManifestListsHashes) {
  auto config = load_config(std::string(SEMILAB_SCENARIOS) + "/smallest.json");
  config.run.samples = 5000;
  const auto dir = scratch("outputs");
  write_outputs(dir, config, run_scenario(config));
  const auto manifest = nlohmann::json::parse(read_text(dir / "manifest.json"));
  bool saw_report = false;
  for (const auto& entry : manifest.at("files")) {
    const std::string path = entry.at("path");
    EXPECT_EQ(entry.at("sha256").get<std::string>(), sha256_file(dir / path));
    saw_report |= path == "report.json";
  }
  EXPECT_TRUE(saw_report);
}
