#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kam/report_io.hpp"
#include "kam/run_config.hpp"

namespace kam {
namespace {

namespace fs = std::filesystem;

TEST(Config, PresetRoundTripsThroughJson) {
  for (const auto& name : preset_names()) {
    const auto cfg = preset_config(name);
    const auto j = to_json(cfg);
    EXPECT_EQ(to_json(config_from_json(j)), j) << name;
  }
}

TEST(Config, PresetOnlyFileMatchesPreset) {
  const auto a = parse_config(R"({"preset": "golden-2d"})");
  EXPECT_EQ(to_json(a), to_json(preset_config("golden-2d")));
  EXPECT_EQ(a.mode, Mode::Measured);
  EXPECT_EQ(a.R.epsilon, 1e-5);
}

TEST(Config, OverridesApplyOnTopOfPreset) {
  const auto c = parse_config(R"({"preset": "golden-2d", "K_max": 6, "R": {"epsilon": 1e-6}})");
  EXPECT_EQ(c.K_max, 6);
  EXPECT_EQ(c.R.epsilon, 1e-6);
  EXPECT_EQ(c.R.preset, "cos-sum-linear");
}

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_THROW(parse_config(R"({"preset": "golden-2d", "epsilon": 1e-5})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"preset": "golden-2d", "R": {"eps": 1e-5}})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"preset": "nope"})"), ValidationError);
}

TEST(Config, InvalidValuesNameTheField) {
  try {
    parse_config(R"({"preset": "golden-2d", "grid_size": -4})");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("grid_size"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_config(R"({"preset": "golden-2d", "mode": "fast"})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"preset": "golden-2d", "r": 0.1, "s": 0.05})"), ValidationError);
}

TEST(Config, MalformedJsonReportsPosition) {
  try {
    parse_config("{\n  \"preset\": \"golden-2d\",,\n}");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("line 2"), std::string::npos) << what;
    EXPECT_NE(what.find("column"), std::string::npos) << what;
  }
}

TEST(Config, MissingFileIsIoError) {
  EXPECT_THROW(load_config("/nonexistent/dir/config.json"), IoError);
}

TEST(Config, RemainderPresets) {
  const auto R = remainder_preset("cos-sum-linear", 2, 1e-5);
  // eps (cos x0 + cos(x0 + x1)) (1 + y0)
  EXPECT_NEAR(majorant_norm(R, 0.0, 1.0), 4e-5, 1e-20);
  EXPECT_TRUE(remainder_preset("zero", 2, 1.0).empty());
  EXPECT_THROW(remainder_preset("nope", 2, 1.0), ValidationError);
}

TEST(Config, EngineOptionsFollowConfig) {
  auto cfg = preset_config("golden-2d");
  cfg.K_max = 6;
  cfg.ode_steps = 12;
  cfg.seed = 9;
  const auto o = engine_options(cfg);
  EXPECT_EQ(o.limits.K_max, 6);
  EXPECT_EQ(o.ode_steps, 12);
  EXPECT_EQ(o.seed, 9u);
  EXPECT_EQ(o.mode, Mode::Measured);
}

RunReport short_run(const RunConfig& cfg) {
  const auto setup = resolve(cfg);
  auto report = run(setup);
  report.verdict = verify_main_theorem(report, setup.chain, setup.theta, cfg.seed);
  return report;
}

TEST(Report, JsonHasDocumentedSectionsAndIsDeterministic) {
  auto cfg = preset_config("golden-2d");
  cfg.k_max = 2;
  const auto a = report_to_json(cfg, short_run(cfg));
  for (const char* key : {"config", "certification", "constants", "warnings", "steps", "summary",
                          "diagnostics", "verdict", "failure", "chain"})
    EXPECT_TRUE(a.contains(key)) << key;
  EXPECT_EQ(a["steps"].size(), 2u);
  const auto b = report_to_json(cfg, short_run(cfg));
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(Report, CsvHasOneRowPerStep) {
  auto cfg = preset_config("golden-2d");
  cfg.k_max = 2;
  const auto csv = report_csv(short_run(cfg));
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "k,r_k,delta_k,s_k,M_k_sched,R_majorant,ratio_rho_k,a_k,Q_drift");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  EXPECT_GE(rows, 2);
}

TEST(Report, NumberFormatting) {
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(NAN), "");
  EXPECT_EQ(std::stod(format_number(0.1)), 0.1);
}

TEST(Report, WriteToMissingDirectoryIsIoError) {
  EXPECT_THROW(write_text("/nonexistent/dir/out.json", "{}"), IoError);
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("kamctl_test_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  int kamctl(const std::string& args) {
    const std::string cmd = std::string(KAMCTL_PATH) + " " + args + " > " +
                            (dir_ / "stdout.txt").string() + " 2> " + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path dir_;
};

TEST_F(Cli, RunWritesReportAndCsv) {
  const auto cfg = write("g.json", R"({"preset": "golden-2d", "k_max": 2})");
  const auto out = dir_ / "report.json";
  const auto csv = dir_ / "report.csv";
  ASSERT_EQ(kamctl("run --config " + cfg.string() + " --out " + out.string() + " --csv " + csv.string()), 0);
  std::ifstream in(out);
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j["steps"].size(), 2u);
  EXPECT_TRUE(fs::exists(csv));
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(kamctl("selftest"), 0);
  EXPECT_EQ(kamctl("certify-frequency --omega 1,0.6180339887498949 --kmax 50"), 0);
  EXPECT_EQ(kamctl("certify-frequency --omega 1,1"), 1);
  EXPECT_EQ(kamctl("certify-frequency --omega 1,abc"), 1);
  EXPECT_EQ(kamctl("run --config " + (dir_ / "missing.json").string()), 3);
  EXPECT_EQ(kamctl("run --config " + write("res.json", R"({"preset": "golden-2d", "omega": [1, 1]})").string()), 1);
  EXPECT_EQ(kamctl("run --config " + write("bad.json", R"({"preset": "golden-2d", "bogus": 1})").string()), 1);
  EXPECT_EQ(kamctl("run --config " + write("big.json", R"({"preset": "golden-2d", "R": {"epsilon": 0.01}})").string()), 2);
  const auto ok = write("g.json", R"({"preset": "golden-2d", "k_max": 1})");
  EXPECT_EQ(kamctl("run --config " + ok.string() + " --out /nonexistent/dir/r.json"), 3);
  EXPECT_EQ(kamctl("constants --config " + ok.string()), 0);
}

TEST_F(Cli, SameConfigSameReport) {
  const auto cfg = write("g.json", R"({"preset": "golden-2d", "k_max": 2, "seed": 5})");
  const auto a = dir_ / "a.json";
  const auto b = dir_ / "b.json";
  ASSERT_EQ(kamctl("run --config " + cfg.string() + " --out " + a.string()), 0);
  ASSERT_EQ(kamctl("run --config " + cfg.string() + " --out " + b.string()), 0);
  std::ifstream ia(a), ib(b);
  std::stringstream sa, sb;
  sa << ia.rdbuf();
  sb << ib.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
}

}  // namespace
}  // namespace kam
