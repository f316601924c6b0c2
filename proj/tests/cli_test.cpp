#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "velander/evaluation.hpp"
#include "velander/model.hpp"
#include "velander/parallel.hpp"
#include "velander/serialization.hpp"
#include "velander/synthetic.hpp"
#include "velander_app/app.hpp"

namespace velander {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::size_t kLength = 768;  // eight days of quarter hours

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("velander_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_profiles(const std::string& name, const std::vector<LoadProfile>& profiles, int year = 2021) {
    std::ofstream out(dir_ / name, std::ios::binary);
    write_meter_csv(out, profiles, year);
    return dir_ / name;
  }

  static std::vector<LoadProfile> population(std::size_t n, std::uint64_t seed, double cv = 0.15) {
    GaussianPopulationSpec spec;
    spec.customers = n;
    spec.length = kLength;
    spec.mean_lo = 10.0;
    spec.mean_hi = 200.0;
    spec.cv_lo = cv;
    spec.cv_hi = cv;
    return gaussian_profiles(gaussian_population_moments(spec, seed), derive_seed(seed, 9));
  }

  // Base config: two periods of one segment on a coarse grid.
  json config() const {
    return {{"inputs",
             {{{"segment", "RES"}, {"year", 2021}, {"path", "res21.csv"}},
              {{"segment", "RES"}, {"year", 2022}, {"path", "res22.csv"}}}},
            {"expected_T", kLength},
            {"grid", {{"lo", 0.1}, {"hi", 0.9}, {"step", 0.1}}},
            {"seed", 7},
            {"output_dir", "out"}};
  }

  void two_periods() {
    write_profiles("res21.csv", population(40, 1), 2021);
    write_profiles("res22.csv", population(40, 2), 2022);
  }

  fs::path save(const json& j, const std::string& name = "run.json") {
    std::ofstream(dir_ / name) << j.dump(2);
    return dir_ / name;
  }

  Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "velander");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    ::testing::internal::CaptureStdout();
    ::testing::internal::CaptureStderr();
    Outcome o;
    o.code = app::run(static_cast<int>(argv.size()), argv.data());
    o.out = ::testing::internal::GetCapturedStdout();
    o.err = ::testing::internal::GetCapturedStderr();
    return o;
  }

  Outcome run(const std::string& command, const fs::path& cfg, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{command, "--config", cfg.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  }

  std::map<std::string, std::string> snapshot(const fs::path& root) const {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = read_text_file(e.path());
    }
    return files;
  }

  fs::path dir_;
};

std::string line_value(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + " ", 0) == 0) return line.substr(key.size() + 1);
  }
  return "";
}

TEST_F(Cli, IngestReconcilesDirtyFixture) {
  auto profiles = population(3, 5);
  profiles[1].values[100] = -0.5;
  write_profiles("dirty.csv", profiles);
  auto cfg = config();
  cfg["inputs"] = {{{"segment", "MIX"}, {"year", 2021}, {"path", "dirty.csv"}}};
  const auto o = run("ingest", save(cfg));
  ASSERT_EQ(o.code, 0) << o.err;

  const auto report = json::parse(read_text_file(dir_ / "out/ingest/MIX_2021.cleaning.json"));
  EXPECT_EQ(report["original"], 3);
  EXPECT_EQ(report["negative"], 1);
  EXPECT_EQ(report["retained"], 2);
  std::ifstream in(dir_ / "out/ingest/MIX_2021.records.csv");
  const auto records = read_records_csv(in);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].customer_id, profiles[0].customer_id);
  EXPECT_EQ(records[1].customer_id, profiles[2].customer_id);
  EXPECT_FALSE(fs::exists(dir_ / "out/.velander.lock"));
  EXPECT_TRUE(fs::exists(dir_ / "out/resolved_config.ingest.json"));
}

TEST_F(Cli, MissingInputExitsUsageAndNamesPath) {
  const auto cfg = save(config());
  const auto o = run("ingest", cfg);
  EXPECT_EQ(o.code, app::kExitUsage);
  EXPECT_NE(o.err.find((dir_ / "res21.csv").string()), std::string::npos) << o.err;
  EXPECT_FALSE(fs::exists(dir_ / "out/ingest"));
}

TEST_F(Cli, ExecutableExitCodes) {
  const std::string cli = VELANDER_CLI_PATH;
  const auto err = dir_ / "stderr.txt";
  const auto status = [&](const std::string& args) {
    const int raw = std::system((cli + " " + args + " 2>" + err.string() + " >/dev/null").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  const auto cfg = save(config());
  EXPECT_EQ(status("ingest --config " + cfg.string()), 2);
  EXPECT_NE(read_text_file(err).find("res21.csv"), std::string::npos);
  EXPECT_EQ(status("ingest"), 2);
  EXPECT_EQ(status("frobnicate --config " + cfg.string()), 2);
  EXPECT_EQ(status("fit --config " + cfg.string() + " --constraint c9"), 2);
  EXPECT_EQ(status("fit --config " + (dir_ / "absent.json").string()), 2);
}

TEST_F(Cli, IngestRerunIsByteIdentical) {
  two_periods();
  const auto cfg = save(config());
  ASSERT_EQ(run("ingest", cfg).code, 0);
  const auto first = snapshot(dir_ / "out/ingest");
  ASSERT_EQ(run("ingest", cfg).code, 0);
  EXPECT_EQ(snapshot(dir_ / "out/ingest"), first);
  EXPECT_EQ(first.size(), 4u);
}

TEST_F(Cli, FitReportsParameterCountsOnFullGrid) {
  two_periods();
  auto cfg = config();
  cfg.erase("grid");
  const auto path = save(cfg);
  ASSERT_EQ(run("ingest", path).code, 0);

  const auto c4 = run("fit", path, {"--constraint", "c4"});
  ASSERT_EQ(c4.code, 0) << c4.err;
  EXPECT_EQ(line_value(c4.out, "parameter_count"), "82");
  const auto c1 = run("fit", path, {"--constraint", "c1"});
  ASSERT_EQ(c1.code, 0) << c1.err;
  EXPECT_EQ(line_value(c1.out, "parameter_count"), "162");
  EXPECT_NE(c1.err.find("override constraint"), std::string::npos);
}

TEST_F(Cli, FitParamsReloadToReportedLoss) {
  two_periods();
  const auto cfg = save(config());
  ASSERT_EQ(run("ingest", cfg).code, 0);
  const auto o = run("fit", cfg, {"--constraint", "c3"});
  ASSERT_EQ(o.code, 0) << o.err;

  const auto params = params_from_json(json::parse(read_text_file(dir_ / "out/fit/RES_2021.C3.params.json")));
  std::ifstream in(dir_ / "out/ingest/RES_2021.records.csv");
  const auto records = read_records_csv(in);
  EXPECT_EQ(format_double(average_pinball_loss(records, params)), line_value(o.out, "achieved_apl_kw"));
  EXPECT_EQ(params.regime, Regime::C3);
}

TEST_F(Cli, FitBeforeIngestIsUsageError) {
  two_periods();
  const auto o = run("fit", save(config()));
  EXPECT_EQ(o.code, app::kExitUsage);
  EXPECT_NE(o.err.find("not been ingested"), std::string::npos) << o.err;
}

TEST_F(Cli, TldNeedsTwoPeriods) {
  two_periods();
  auto cfg = config();
  cfg["inputs"].erase(1);
  cfg["analyses"] = {{"tld", {{"enabled", true}}}};
  const auto path = save(cfg);
  ASSERT_EQ(run("ingest", path).code, 0);
  const auto o = run("evaluate", path);
  EXPECT_EQ(o.code, app::kExitUsage);
  EXPECT_NE(o.err.find("tld requires two periods"), std::string::npos) << o.err;
}

TEST_F(Cli, StochasticAnalysesNeedSeed) {
  two_periods();
  auto cfg = config();
  cfg.erase("seed");
  cfg["analyses"] = {{"cv", {{"enabled", true}}}};
  const auto path = save(cfg);
  ASSERT_EQ(run("ingest", path).code, 0);
  EXPECT_EQ(run("evaluate", path).code, app::kExitUsage);
  EXPECT_EQ(run("evaluate", path, {"--seed", "3"}).code, 0);
}

TEST_F(Cli, UnknownConfigKeyRejected) {
  auto cfg = config();
  cfg["analyses"] = {{"cv", {{"enabeld", true}}}};
  const auto o = run("ingest", save(cfg));
  EXPECT_EQ(o.code, app::kExitUsage);
  EXPECT_NE(o.err.find("enabeld"), std::string::npos);
}

TEST_F(Cli, HeldLockRefusesRun) {
  two_periods();
  const auto cfg = save(config());
  fs::create_directories(dir_ / "out");
  std::ofstream(dir_ / "out/.velander.lock") << "1\n";
  const auto o = run("ingest", cfg);
  EXPECT_EQ(o.code, app::kExitFailure);
  EXPECT_NE(o.err.find("locked"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "out/.velander.lock"));
}

json all_analyses() {
  return {{"cv", {{"enabled", true}, {"folds", 4}}},
          {"tld", {{"enabled", true}}},
          {"sld", {{"enabled", true}}},
          {"aggregation", {{"enabled", true}, {"levels", {2, 5}}, {"samples", 60}, {"folds", 3}}},
          {"curves", {{"enabled", true}, {"samples", 11}}}};
}

TEST_F(Cli, EvaluateIndexListsEveryAnalysis) {
  two_periods();
  auto cfg = config();
  cfg["analyses"] = all_analyses();
  const auto path = save(cfg);
  ASSERT_EQ(run("ingest", path).code, 0);
  const auto o = run("evaluate", path);
  ASSERT_EQ(o.code, 0) << o.err;

  const auto index = json::parse(read_text_file(dir_ / "out/evaluate/index.json"));
  EXPECT_EQ(index["schema_version"], app::kSchemaVersion);
  EXPECT_EQ(index["seed"], 7);
  EXPECT_FALSE(index.contains("threads"));
  for (const char* name : {"cv", "tld", "sld", "aggregation", "curves"}) {
    ASSERT_TRUE(index["analyses"].contains(name)) << name;
    const auto& files = index["analyses"][name]["files"];
    ASSERT_FALSE(files.empty()) << name;
    for (const auto& f : files) EXPECT_TRUE(fs::exists(dir_ / "out" / f.get<std::string>())) << f;
  }
  EXPECT_EQ(index["analyses"]["tld"]["pairs"], 1);

  const auto tld = read_text_file(dir_ / "out/evaluate/tld/tld.csv");
  EXPECT_EQ(tld.substr(0, tld.find('\n')), "segment,year_target,year_source,regime,apl_transfer,apl_optimal,tld");
  EXPECT_NE(tld.find("RES,2022,2021,C4,"), std::string::npos);
}

TEST_F(Cli, EvaluateIsByteIdenticalAcrossRerunsAndThreads) {
  two_periods();
  auto cfg = config();
  cfg["analyses"] = all_analyses();
  const auto path = save(cfg);
  ASSERT_EQ(run("ingest", path).code, 0);
  ASSERT_EQ(run("evaluate", path, {"--threads", "1"}).code, 0);
  const auto first = snapshot(dir_ / "out/evaluate");
  ASSERT_EQ(run("evaluate", path, {"--threads", "1"}).code, 0);
  EXPECT_EQ(snapshot(dir_ / "out/evaluate"), first);
  ASSERT_EQ(run("evaluate", path, {"--threads", "4"}).code, 0);
  EXPECT_EQ(snapshot(dir_ / "out/evaluate"), first);
  ASSERT_EQ(run("evaluate", path, {"--seed", "8"}).code, 0);
  EXPECT_NE(snapshot(dir_ / "out/evaluate"), first);
}

TEST_F(Cli, SynthWithoutModeIsUsageError) {
  const auto o = run("synth", save(config()));
  EXPECT_EQ(o.code, app::kExitUsage);
  EXPECT_NE(o.err.find("source dataset"), std::string::npos);
}

TEST_F(Cli, SynthZeroVarianceReproducesConstantProfiles) {
  auto flat = population(4, 3, 0.0);
  write_profiles("res21.csv", flat);
  auto cfg = config();
  cfg["inputs"].erase(1);
  cfg["synth"] = {{"mode", "moments"}, {"source", "RES_2021"}};
  ASSERT_EQ(run("synth", save(cfg)).code, 0);

  std::ifstream in(dir_ / "out/synth/RES-gauss_2021.csv");
  const auto synthetic = parse_meter_csv(in);
  ASSERT_EQ(synthetic.size(), flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double level = synthetic[i].values.front();
    EXPECT_NEAR(level, flat[i].values.front(), 1e-12 * level) << i;
    for (double v : synthetic[i].values) ASSERT_EQ(v, level) << i;
  }
}

TEST_F(Cli, SynthMomentsAreRecoverable) {
  const auto source = population(6, 4, 0.2);
  write_profiles("res21.csv", source);
  auto cfg = config();
  cfg["inputs"].erase(1);
  cfg["synth"] = {{"mode", "moments"}};
  ASSERT_EQ(run("synth", save(cfg)).code, 0);

  std::ifstream in(dir_ / "out/synth/RES-gauss_2021.csv");
  const auto synthetic = parse_meter_csv(in);
  ASSERT_EQ(synthetic.size(), source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    const auto want = profile_moments(source[i]);
    const auto got = profile_moments(synthetic[i]);
    const double se = std::sqrt(want.variance / kLength);
    EXPECT_NEAR(got.mean, want.mean, 5 * se) << i;
    EXPECT_NEAR(std::sqrt(got.variance), std::sqrt(want.variance), 0.15 * std::sqrt(want.variance)) << i;
  }
  const auto manifest = json::parse(read_text_file(dir_ / "out/synth/manifest.json"));
  EXPECT_EQ(manifest["inputs"][0]["segment"], "RES-gauss");
}

TEST_F(Cli, SynthVelanderYearsFeedIngest) {
  auto cfg = config();
  cfg["synth"] = {{"mode", "velander"}, {"years", {2021, 2022}}, {"customers", 30}, {"length", kLength}};
  ASSERT_EQ(run("synth", save(cfg)).code, 0);
  const auto a = read_text_file(dir_ / "out/synth/SYN_2021.csv");
  const auto b = read_text_file(dir_ / "out/synth/SYN_2022.csv");
  EXPECT_NE(a, b);

  auto next = config();
  next["inputs"] = {{{"segment", "SYN"}, {"year", 2021}, {"path", "out/synth/SYN_2021.csv"}}};
  next["output_dir"] = "out2";
  const auto o = run("ingest", save(next, "next.json"));
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(json::parse(read_text_file(dir_ / "out2/ingest/SYN_2021.cleaning.json"))["retained"], 30);
}

TEST_F(Cli, VerifyConfirmsSmallFit) {
  two_periods();
  auto cfg = config();
  cfg["verify"] = {{"records", 5}, {"levels", {0.3, 0.7}}};
  const auto path = save(cfg);
  ASSERT_EQ(run("ingest", path).code, 0);
  for (const char* regime : {"c1", "c4"}) {
    const auto o = run("verify", path, {"--constraint", regime});
    EXPECT_EQ(o.code, app::kExitOk) << regime << o.out << o.err;
    EXPECT_EQ(line_value(o.out, "verdict"), "confirmed");
  }
  const auto j = json::parse(read_text_file(dir_ / "out/verify/RES_2021.C4.verify.json"));
  EXPECT_EQ(j["records"], 5);
  EXPECT_EQ(j["status"], "confirmed");
}

}  // namespace
}  // namespace velander
