#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "velander/evaluation.hpp"
#include "velander/types.hpp"

namespace velander::app {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // runtime, solver or validation failure
inline constexpr int kExitUsage = 2;    // bad flags, config or missing input
inline constexpr int kExitInconclusive = 3;  // verify ran out of budget

// Bad configuration or a missing input; maps to kExitUsage.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct InputSpec {
  std::string segment;
  int year = 0;
  std::filesystem::path path;

  // "<segment>_<year>", the name every derived file carries.
  std::string dataset() const { return segment + "_" + std::to_string(year); }
};

struct GridSpec {
  double lo = 0.10;
  double hi = 0.90;
  double step = 0.01;
};

struct CvSpec {
  bool enabled = false;
  std::size_t folds = 5;
};

struct SldSpec {
  bool enabled = false;
  std::vector<std::pair<PercentileBand, PercentileBand>> splits{{{0, 50}, {50, 100}}, {{50, 100}, {0, 50}}};
};

struct AggregationSpec {
  bool enabled = false;
  std::string dataset;  // defaults to fit.dataset
  std::vector<int> levels{2, 5, 10, 25};
  std::size_t samples = 1000;
  std::size_t folds = 5;
};

struct CurvesSpec {
  bool enabled = false;
  std::string dataset;
  std::vector<int> levels{1, 2, 3};
  std::vector<double> taus{0.2, 0.5, 0.8};
  std::size_t samples = 50;
};

struct SynthSpec {
  std::string mode;     // "moments", "velander" or "gaussian"; empty = not configured
  std::string source;   // dataset whose profiles seed the moment-matched mode
  std::string segment = "SYN";
  std::vector<int> years{2023};
  std::size_t customers = 500;
  std::size_t length = 0;  // 0 = a full year at the configured interval
  // velander mode
  double energy_lo = 1e3, energy_hi = 1e6, alpha = 0.1, beta_lo = 1.0, beta_hi = 3.0;
  // gaussian mode
  double mean_lo = 5.0, mean_hi = 500.0, cv_lo = 0.2, cv_hi = 0.6;
};

struct VerifySpec {
  std::string dataset;
  std::size_t records = 6;
  std::vector<double> levels{0.2, 0.5, 0.8};
  std::size_t budget = 4'000'000;
};

// Everything a run depends on. Relative paths in the file are resolved
// against the directory holding it.
struct RunConfig {
  std::vector<InputSpec> inputs;
  double interval_minutes = kReferenceIntervalMinutes;
  std::optional<std::size_t> expected_T;  // readings per profile; default from the year
  GridSpec grid;
  Regime regime = Regime::C4;
  std::optional<std::uint64_t> seed;
  double tolerance = 1e-7;
  unsigned threads = 1;
  std::filesystem::path output_dir = "out";
  std::string fit_dataset;  // defaults to the first input
  CvSpec cv;
  bool tld = false;
  SldSpec sld;
  AggregationSpec aggregation;
  CurvesSpec curves;
  SynthSpec synth;
  VerifySpec verify;

  QuantileGrid quantile_grid() const;
  const InputSpec& input(const std::string& dataset) const;
  std::size_t expected_length(int year) const;
};

RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

// Schema of every output written; bumped on any format change.
inline constexpr int kSchemaVersion = 1;

int cmd_ingest(const RunConfig& config);
int cmd_fit(const RunConfig& config);
int cmd_evaluate(const RunConfig& config);
int cmd_synth(const RunConfig& config);
int cmd_verify(const RunConfig& config);

// Full command line, argv[0] included. Never throws.
int run(int argc, const char* const* argv);

}  // namespace velander::app
