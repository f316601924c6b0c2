#include <fcntl.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "velander/evaluation.hpp"
#include "velander/ingest.hpp"
#include "velander/model.hpp"
#include "velander/parallel.hpp"
#include "velander/reports.hpp"
#include "velander/serialization.hpp"
#include "velander/solver.hpp"
#include "velander/synthetic.hpp"
#include "velander_app/app.hpp"

namespace velander::app {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Exclusive claim on an output directory for the lifetime of a command.
class RunLock {
 public:
  explicit RunLock(const fs::path& dir) : path_(dir / ".velander.lock") {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      if (errno == EEXIST) {
        throw Error("output directory " + dir.string() + " is locked by another run (remove " + path_.string() +
                    " if that run died)");
      }
      throw Error("cannot create lock " + path_.string() + ": " + std::strerror(errno));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

// Files written by a command together with the schema each must satisfy.
class Outputs {
 public:
  explicit Outputs(fs::path root) : root_(std::move(root)) {}

  void csv(const fs::path& rel, const std::string& text) {
    write_text_file(root_ / rel, text);
    csv_.push_back(rel);
  }
  void json_file(const fs::path& rel, const json& j, std::vector<std::string> required) {
    write_text_file(root_ / rel, j.dump(2) + "\n");
    json_.emplace_back(rel, std::move(required));
  }
  // For files streamed to disk by the caller.
  void streamed_csv(const fs::path& rel) { csv_.push_back(rel); }

  // Re-reads every file: CSVs need a header and rows with its field count,
  // JSON files must parse and hold their required keys.
  void validate() const {
    for (const auto& rel : csv_) {
      std::ifstream in(root_ / rel, std::ios::binary);
      std::string line;
      if (!in || !std::getline(in, line) || line.empty()) throw Error("output " + rel.string() + " has no header");
      const auto fields = std::count(line.begin(), line.end(), ',');
      std::size_t row = 1;
      while (std::getline(in, line)) {
        ++row;
        if (std::count(line.begin(), line.end(), ',') != fields) {
          throw Error("output " + rel.string() + " row " + std::to_string(row) + " does not match its header");
        }
      }
    }
    for (const auto& [rel, required] : json_) {
      json j;
      try {
        j = json::parse(read_text_file(root_ / rel));
      } catch (const json::exception& e) {
        throw Error("output " + rel.string() + " is not valid JSON: " + e.what());
      }
      for (const auto& key : required) {
        if (!j.contains(key)) throw Error("output " + rel.string() + " lacks '" + key + "'");
      }
    }
  }

  std::vector<std::string> files_under(const fs::path& prefix) const {
    std::vector<std::string> out;
    auto add = [&](const fs::path& rel) {
      const auto s = rel.generic_string();
      if (s.rfind(prefix.generic_string() + "/", 0) == 0) out.push_back(s);
    };
    for (const auto& rel : csv_) add(rel);
    for (const auto& [rel, keys] : json_) add(rel);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  fs::path root_;
  std::vector<fs::path> csv_;
  std::vector<std::pair<fs::path, std::vector<std::string>>> json_;
};

template <typename F>
std::string render(F&& writer) {
  std::ostringstream out;
  writer(out);
  return out.str();
}

const std::vector<std::string> kParamKeys{"constraint", "levels", "alpha", "beta", "fit_ec_range", "units"};

void require_inputs(const RunConfig& c) {
  if (c.inputs.empty()) throw UsageError("no inputs configured");
}

std::uint64_t require_seed(const RunConfig& c, const std::string& what) {
  if (!c.seed) throw UsageError(what + " is stochastic and needs a seed (config 'seed' or --seed)");
  return *c.seed;
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw UsageError(what + " not found: " + path.string());
}

std::string default_dataset(const RunConfig& c, const std::string& chosen) {
  if (!chosen.empty()) {
    (void)c.input(chosen);
    return chosen;
  }
  if (!c.fit_dataset.empty()) {
    (void)c.input(c.fit_dataset);
    return c.fit_dataset;
  }
  require_inputs(c);
  return c.inputs.front().dataset();
}

fs::path records_path(const RunConfig& c, const std::string& dataset) {
  return c.output_dir / "ingest" / (dataset + ".records.csv");
}

std::vector<CustomerRecord> load_records(const RunConfig& c, const std::string& dataset) {
  const auto path = records_path(c, dataset);
  if (!fs::is_regular_file(path)) {
    throw UsageError("dataset " + dataset + " has not been ingested (missing " + path.string() + ")");
  }
  std::ifstream in(path, std::ios::binary);
  auto records = read_records_csv(in, path.string());
  if (records.empty()) throw Error("dataset " + dataset + " holds no customers after cleaning");
  return records;
}

CleaningResult read_and_clean(const RunConfig& c, const InputSpec& in) {
  require_file(in.path, "input file");
  MeterCsvOptions options;
  options.interval_minutes = c.interval_minutes;
  return clean_profiles(parse_meter_csv(RawMeterFile{in.path, in.year, in.segment}, options),
                        c.expected_length(in.year));
}

Population load_population(const RunConfig& c, const std::string& dataset) {
  auto cleaned = read_and_clean(c, c.input(dataset));
  if (cleaned.profiles.empty()) throw Error("dataset " + dataset + " holds no customers after cleaning");
  return Population(std::move(cleaned.profiles));
}

EvaluationOptions eval_options(const RunConfig& c) { return {c.tolerance, c.threads}; }

// Rethrows with the analysis named, keeping the exit-code class.
template <typename F>
void run_analysis(const std::string& name, F&& body) {
  try {
    body();
  } catch (const UsageError& e) {
    throw UsageError("analysis " + name + ": " + e.what());
  } catch (const Error& e) {
    throw Error("analysis " + name + ": " + e.what());
  }
}

void echo_config(const RunConfig& c, const std::string& command) {
  write_text_file(c.output_dir / ("resolved_config." + command + ".json"), to_json(c).dump(2) + "\n");
}

}  // namespace

int cmd_ingest(const RunConfig& c) {
  require_inputs(c);
  for (const auto& in : c.inputs) require_file(in.path, "input file");
  RunLock lock(c.output_dir);
  echo_config(c, "ingest");
  Outputs outputs(c.output_dir);
  for (const auto& in : c.inputs) {
    auto cleaned = read_and_clean(c, in);
    std::vector<CustomerRecord> records;
    records.reserve(cleaned.profiles.size());
    for (const auto& p : cleaned.profiles) records.push_back(compute_features(p));
    records = leap_year_adjust(std::move(records), in.year);
    const auto name = in.dataset();
    outputs.csv(fs::path("ingest") / (name + ".records.csv"), render([&](std::ostream& o) {
                  write_records_csv(o, records);
                }));
    outputs.json_file(fs::path("ingest") / (name + ".cleaning.json"), to_json(cleaned.report),
                      {"original", "incomplete", "negative", "zero_first_week", "retained"});
    const auto& r = cleaned.report;
    spdlog::info("{}: {} profiles, {} incomplete, {} negative, {} zero first week, {} retained", name, r.original,
                 r.incomplete, r.negative, r.zero_first_week, r.retained);
  }
  outputs.validate();
  return kExitOk;
}

int cmd_fit(const RunConfig& c) {
  const auto dataset = default_dataset(c, "");
  const auto records = load_records(c, dataset);
  RunLock lock(c.output_dir);
  echo_config(c, "fit");
  const auto result = fit(FitProblem(records, c.quantile_grid(), c.regime, c.tolerance));
  Outputs outputs(c.output_dir);
  const fs::path rel = fs::path("fit") / (dataset + "." + std::string(to_string(c.regime)) + ".params.json");
  outputs.json_file(rel, to_json(result.params), kParamKeys);
  outputs.validate();

  // The file must reproduce the loss being reported.
  const auto reloaded = params_from_json(json::parse(read_text_file(c.output_dir / rel)));
  const double apl = average_pinball_loss(records, reloaded);
  if (apl != result.achieved_apl) {
    throw Error("reloaded parameters give APL " + format_double(apl) + ", expected " +
                format_double(result.achieved_apl));
  }
  std::cout << "dataset " << dataset << " constraint " << to_string(c.regime) << '\n'
            << "achieved_apl_kw " << format_double(result.achieved_apl) << '\n'
            << "parameter_count " << result.parameter_count << '\n'
            << "params " << (c.output_dir / rel).string() << '\n';
  spdlog::info("solver: {} iterations, relative gap {:.3g}", result.diagnostics.iterations,
               result.diagnostics.relative_gap);
  return kExitOk;
}

int cmd_evaluate(const RunConfig& c) {
  if (!(c.cv.enabled || c.tld || c.sld.enabled || c.aggregation.enabled || c.curves.enabled)) {
    throw UsageError("no analysis enabled under 'analyses'");
  }
  require_inputs(c);
  const auto grid = c.quantile_grid();
  const auto options = eval_options(c);
  if (c.cv.enabled || c.aggregation.enabled || c.curves.enabled) require_seed(c, "evaluate");

  // Fail on missing inputs before any work starts.
  std::map<std::string, std::vector<CustomerRecord>> records;
  if (c.cv.enabled || c.tld || c.sld.enabled) {
    for (const auto& in : c.inputs) records[in.dataset()] = load_records(c, in.dataset());
  }
  if (c.tld) {
    std::map<std::string, int> years;
    for (const auto& in : c.inputs) ++years[in.segment];
    if (std::none_of(years.begin(), years.end(), [](const auto& kv) { return kv.second >= 2; })) {
      throw UsageError("analysis tld: tld requires two periods");
    }
  }

  RunLock lock(c.output_dir);
  echo_config(c, "evaluate");
  Outputs outputs(c.output_dir);
  const fs::path root = "evaluate";
  json index = {{"schema_version", kSchemaVersion},
                {"constraint", std::string(to_string(c.regime))},
                {"seed", c.seed ? json(*c.seed) : json(nullptr)},
                {"grid", {{"lo", c.grid.lo}, {"hi", c.grid.hi}, {"step", c.grid.step}, {"levels", grid.size()}}},
                {"tolerance", c.tolerance},
                {"analyses", json::object()}};

  if (c.cv.enabled) {
    run_analysis("cv", [&] {
      std::uint64_t unit = 0;
      for (const auto& in : c.inputs) {
        const auto name = in.dataset();
        const auto report =
            kfold_cv(records.at(name), grid, c.regime, c.cv.folds, derive_seed(*c.seed, unit++), options);
        outputs.csv(root / "cv" / (name + ".csv"), render([&](std::ostream& o) { write_cv_csv(o, name, report); }));
        outputs.json_file(root / "cv" / (name + ".json"), cv_to_json(name, report),
                          {"dataset", "regime", "folds", "seed", "per_fold", "mean_train_apl", "mean_test_apl"});
      }
      index["analyses"]["cv"] = {{"folds", c.cv.folds}, {"files", outputs.files_under(root / "cv")}};
    });
  }

  if (c.tld) {
    run_analysis("tld", [&] {
      std::map<std::string, std::vector<const InputSpec*>> by_segment;
      for (const auto& in : c.inputs) by_segment[in.segment].push_back(&in);
      std::vector<TldEntry> entries;
      for (auto& [segment, ins] : by_segment) {
        std::sort(ins.begin(), ins.end(), [](auto* a, auto* b) { return a->year < b->year; });
        for (std::size_t i = 1; i < ins.size(); ++i) {
          const auto& earlier = records.at(ins[i - 1]->dataset());
          const auto theta = fit(FitProblem(earlier, grid, c.regime, c.tolerance)).params;
          entries.push_back({segment, ins[i]->year, ins[i - 1]->year, c.regime,
                             tld(records.at(ins[i]->dataset()), grid, c.regime, theta, options)});
        }
      }
      outputs.csv(root / "tld" / "tld.csv", render([&](std::ostream& o) { write_tld_csv(o, entries); }));
      outputs.json_file(root / "tld" / "tld.json", json{{"entries", tld_to_json(entries)}}, {"entries"});
      index["analyses"]["tld"] = {{"pairs", entries.size()}, {"files", outputs.files_under(root / "tld")}};
    });
  }

  if (c.sld.enabled) {
    run_analysis("sld", [&] {
      std::vector<SldEntry> entries;
      for (const auto& in : c.inputs) {
        for (const auto& [target, source] : c.sld.splits) {
          entries.push_back({in.dataset(), c.regime, sld(records.at(in.dataset()), grid, c.regime, target, source,
                                                         options)});
        }
      }
      outputs.csv(root / "sld" / "sld.csv", render([&](std::ostream& o) { write_sld_csv(o, entries); }));
      outputs.json_file(root / "sld" / "sld.json", json{{"entries", sld_to_json(entries)}}, {"entries"});
      index["analyses"]["sld"] = {{"entries", entries.size()}, {"files", outputs.files_under(root / "sld")}};
    });
  }

  if (c.aggregation.enabled) {
    run_analysis("aggregation", [&] {
      const auto name = default_dataset(c, c.aggregation.dataset);
      const auto population = load_population(c, name);
      const auto rows = aggregation_cv(population, c.aggregation.levels, grid, c.regime, derive_seed(*c.seed, 1000),
                                       c.aggregation.samples, c.aggregation.folds, options);
      outputs.csv(root / "aggregation" / "aggregation.csv",
                  render([&](std::ostream& o) { write_aggregation_csv(o, name, c.regime, rows); }));
      outputs.json_file(root / "aggregation" / "aggregation.json", aggregation_to_json(name, c.regime, rows),
                        {"dataset", "regime", "levels"});
      index["analyses"]["aggregation"] = {{"dataset", name},
                                          {"samples", c.aggregation.samples},
                                          {"files", outputs.files_under(root / "aggregation")}};
    });
  }

  if (c.curves.enabled) {
    run_analysis("curves", [&] {
      const auto name = default_dataset(c, c.curves.dataset);
      const auto population = load_population(c, name);
      std::map<int, QuantileParamSet> by_level;
      json bands = json::array();
      for (int level : c.curves.levels) {
        const auto band = band_restricted_fit(population, level, grid, c.regime,
                                              derive_seed(*c.seed, 2000 + static_cast<std::uint64_t>(level)), options);
        outputs.json_file(root / "curves" / ("params_level" + std::to_string(level) + ".json"), to_json(band.params),
                          kParamKeys);
        bands.push_back({{"level", level}, {"sampled", band.sampled}, {"retained", band.retained},
                         {"train_apl", band.train_apl}});
        by_level.emplace(level, band.params);
      }
      const auto& individuals = population.records();
      const std::vector<double> ec{ec_percentile(individuals, 40), ec_percentile(individuals, 50),
                                   ec_percentile(individuals, 60)};
      const auto curves = export_curves(by_level, ec, c.curves.taus, ec.front(), ec.back(), c.curves.samples);
      outputs.csv(root / "curves" / "curves.csv", render([&](std::ostream& o) { write_curves_csv(o, curves); }));
      index["analyses"]["curves"] = {{"dataset", name},
                                     {"band", {ec.front(), ec.back()}},
                                     {"fits", std::move(bands)},
                                     {"warnings", curves.warnings},
                                     {"files", outputs.files_under(root / "curves")}};
    });
  }

  outputs.json_file(root / "index.json", index, {"schema_version", "analyses"});
  outputs.validate();
  std::cout << "index " << (c.output_dir / root / "index.json").string() << '\n';
  return kExitOk;
}

int cmd_synth(const RunConfig& c) {
  const auto& s = c.synth;
  if (s.mode.empty()) {
    throw UsageError("synth needs either a source dataset (synth.mode = moments) or a generative spec "
                     "(synth.mode = velander or gaussian)");
  }
  const std::uint64_t seed = require_seed(c, "synth");

  struct Planned {
    std::string segment;
    int year;
    std::vector<LoadProfile> profiles;
  };
  std::vector<Planned> plan;
  if (s.mode == "moments") {
    const auto name = default_dataset(c, s.source);
    const auto& in = c.input(name);
    auto cleaned = read_and_clean(c, in);
    plan.push_back({in.segment + "-gauss", in.year, synth_gaussian_profiles(cleaned.profiles, seed, c.threads)});
  } else {
    if (s.years.empty()) throw UsageError("synth.years is empty");
    for (int year : s.years) {
      const std::size_t length = s.length ? s.length : expected_intervals(year, c.interval_minutes);
      const auto year_seed = derive_seed(seed, static_cast<std::uint64_t>(year));
      std::vector<LoadProfile> profiles;
      if (s.mode == "velander") {
        VelanderSurfaceSpec spec{s.customers, s.energy_lo, s.energy_hi, s.alpha, s.beta_lo, s.beta_hi};
        profiles = velander_surface_profiles(spec, length, year_seed);
      } else {
        GaussianPopulationSpec spec{s.customers, length, c.interval_minutes, s.mean_lo, s.mean_hi, s.cv_lo, s.cv_hi};
        const auto moments = gaussian_population_moments(spec, year_seed);
        profiles = gaussian_profiles(moments, derive_seed(year_seed, 1), c.threads);
      }
      for (auto& p : profiles) p.interval_minutes = c.interval_minutes;
      plan.push_back({s.segment, year, std::move(profiles)});
    }
  }

  RunLock lock(c.output_dir);
  echo_config(c, "synth");
  Outputs outputs(c.output_dir);
  json manifest = {{"schema_version", kSchemaVersion}, {"mode", s.mode}, {"seed", seed}, {"inputs", json::array()}};
  for (const auto& item : plan) {
    const fs::path rel = fs::path("synth") / (item.segment + "_" + std::to_string(item.year) + ".csv");
    fs::create_directories((c.output_dir / rel).parent_path());
    {
      std::ofstream out(c.output_dir / rel, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot write " + (c.output_dir / rel).string());
      write_meter_csv(out, item.profiles, item.year);
      if (!out) throw Error("failed writing " + (c.output_dir / rel).string());
    }
    outputs.streamed_csv(rel);
    manifest["inputs"].push_back({{"segment", item.segment}, {"year", item.year}, {"path", rel.generic_string()}});
    spdlog::info("{}: {} profiles of {} readings", rel.generic_string(), item.profiles.size(),
                 item.profiles.empty() ? 0 : item.profiles.front().length());
  }
  outputs.json_file(fs::path("synth") / "manifest.json", manifest, {"schema_version", "inputs"});
  outputs.validate();
  return kExitOk;
}

int cmd_verify(const RunConfig& c) {
  const auto dataset = default_dataset(c, c.verify.dataset);
  auto records = load_records(c, dataset);
  if (c.verify.records == 0) throw UsageError("verify.records must be positive");
  if (records.size() > c.verify.records) records.resize(c.verify.records);
  QuantileGrid grid({0.5});
  try {
    grid = QuantileGrid(c.verify.levels);
  } catch (const Error& e) {
    throw UsageError(std::string("verify.levels: ") + e.what());
  }
  RunLock lock(c.output_dir);
  echo_config(c, "verify");
  const FitProblem problem(records, grid, c.regime, c.tolerance);
  const auto result = fit(problem);
  OracleOptions options;
  options.budget = c.verify.budget;
  const auto verdict = verify_optimality(problem, result.params, options);

  Outputs outputs(c.output_dir);
  json j = {{"dataset", dataset},
            {"constraint", std::string(to_string(c.regime))},
            {"records", records.size()},
            {"levels", grid.levels()},
            {"status", std::string(to_string(verdict.status))},
            {"candidate_apl", verdict.candidate_apl},
            {"best_apl", verdict.best_apl},
            {"gap", verdict.gap},
            {"evaluations", verdict.evaluations},
            {"budget", c.verify.budget}};
  outputs.json_file(fs::path("verify") / (dataset + "." + std::string(to_string(c.regime)) + ".verify.json"), j,
                    {"status", "candidate_apl", "best_apl", "gap"});
  outputs.validate();
  std::cout << "verdict " << to_string(verdict.status) << '\n'
            << "candidate_apl_kw " << format_double(verdict.candidate_apl) << '\n'
            << "best_apl_kw " << format_double(verdict.best_apl) << '\n'
            << "gap_kw " << format_double(verdict.gap) << '\n';
  switch (verdict.status) {
    case OptimalityVerdict::Status::Confirmed: return kExitOk;
    case OptimalityVerdict::Status::Improvable: return kExitFailure;
    case OptimalityVerdict::Status::Inconclusive: return kExitInconclusive;
  }
  return kExitFailure;
}

}  // namespace velander::app
