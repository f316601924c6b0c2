#include <algorithm>
#include <set>

#include "velander/ingest.hpp"
#include "velander/serialization.hpp"
#include "velander_app/app.hpp"

namespace velander::app {
namespace {

using nlohmann::json;

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw UsageError(where + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw UsageError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError("bad value for '" + std::string(key) + "' in " + where);
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

PercentileBand band_of(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 2) throw UsageError("a percentile band needs two bounds");
  return {v[0], v[1]};
}

json band_json(PercentileBand b) { return json::array({b.lo, b.hi}); }

}  // namespace

QuantileGrid RunConfig::quantile_grid() const {
  auto g = QuantileGrid::from_range(grid.lo, grid.hi, grid.step);
  if (g.size() < 2) throw UsageError("quantile grid must hold at least 2 levels");
  return g;
}

const InputSpec& RunConfig::input(const std::string& dataset) const {
  for (const auto& in : inputs) {
    if (in.dataset() == dataset) return in;
  }
  throw UsageError("no input named '" + dataset + "'");
}

std::size_t RunConfig::expected_length(int year) const {
  return expected_T ? *expected_T : expected_intervals(year, interval_minutes);
}

RunConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  only_keys(j, "config", {"inputs", "interval_minutes", "expected_T", "grid", "constraint", "seed", "tolerance",
                          "threads", "output_dir", "fit", "analyses", "synth", "verify"});
  RunConfig c;
  if (j.contains("inputs")) {
    if (!j["inputs"].is_array()) throw UsageError("'inputs' must be an array");
    for (const auto& e : j["inputs"]) {
      only_keys(e, "inputs entry", {"segment", "year", "path"});
      InputSpec in;
      if (!e.contains("segment") || !e.contains("year") || !e.contains("path")) {
        throw UsageError("each input needs segment, year and path");
      }
      read(e, "segment", in.segment, "inputs");
      read(e, "year", in.year, "inputs");
      std::string path;
      read(e, "path", path, "inputs");
      in.path = resolve(base_dir, path);
      if (in.segment.empty() || in.segment.find_first_of("/\\,\"") != std::string::npos) {
        throw UsageError("segment name '" + in.segment + "' is empty or holds a path or CSV delimiter");
      }
      for (const auto& other : c.inputs) {
        if (other.dataset() == in.dataset()) throw UsageError("input " + in.dataset() + " listed twice");
      }
      c.inputs.push_back(std::move(in));
    }
  }
  read(j, "interval_minutes", c.interval_minutes, "config");
  if (j.contains("expected_T") && !j["expected_T"].is_null()) {
    std::size_t t = 0;
    read(j, "expected_T", t, "config");
    c.expected_T = t;
  }
  if (j.contains("grid")) {
    only_keys(j["grid"], "grid", {"lo", "hi", "step"});
    read(j["grid"], "lo", c.grid.lo, "grid");
    read(j["grid"], "hi", c.grid.hi, "grid");
    read(j["grid"], "step", c.grid.step, "grid");
  }
  if (j.contains("constraint")) {
    std::string s;
    read(j, "constraint", s, "config");
    try {
      c.regime = parse_regime(s);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  if (j.contains("seed") && !j["seed"].is_null()) {
    std::uint64_t s = 0;
    read(j, "seed", s, "config");
    c.seed = s;
  }
  read(j, "tolerance", c.tolerance, "config");
  read(j, "threads", c.threads, "config");
  if (j.contains("output_dir")) {
    std::string out;
    read(j, "output_dir", out, "config");
    c.output_dir = resolve(base_dir, out);
  } else {
    c.output_dir = resolve(base_dir, c.output_dir);
  }
  if (j.contains("fit")) {
    only_keys(j["fit"], "fit", {"dataset"});
    read(j["fit"], "dataset", c.fit_dataset, "fit");
  }
  if (j.contains("analyses")) {
    const auto& a = j["analyses"];
    only_keys(a, "analyses", {"cv", "tld", "sld", "aggregation", "curves"});
    if (a.contains("cv")) {
      only_keys(a["cv"], "analyses.cv", {"enabled", "folds"});
      read(a["cv"], "enabled", c.cv.enabled, "analyses.cv");
      read(a["cv"], "folds", c.cv.folds, "analyses.cv");
    }
    if (a.contains("tld")) {
      only_keys(a["tld"], "analyses.tld", {"enabled"});
      read(a["tld"], "enabled", c.tld, "analyses.tld");
    }
    if (a.contains("sld")) {
      only_keys(a["sld"], "analyses.sld", {"enabled", "splits"});
      read(a["sld"], "enabled", c.sld.enabled, "analyses.sld");
      if (a["sld"].contains("splits")) {
        c.sld.splits.clear();
        try {
          for (const auto& s : a["sld"]["splits"]) c.sld.splits.emplace_back(band_of(s.at(0)), band_of(s.at(1)));
        } catch (const json::exception&) {
          throw UsageError("analyses.sld.splits must be [[[a, b], [c, d]], ...]");
        }
      }
    }
    if (a.contains("aggregation")) {
      const auto& g = a["aggregation"];
      only_keys(g, "analyses.aggregation", {"enabled", "dataset", "levels", "samples", "folds"});
      read(g, "enabled", c.aggregation.enabled, "analyses.aggregation");
      read(g, "dataset", c.aggregation.dataset, "analyses.aggregation");
      read(g, "levels", c.aggregation.levels, "analyses.aggregation");
      read(g, "samples", c.aggregation.samples, "analyses.aggregation");
      read(g, "folds", c.aggregation.folds, "analyses.aggregation");
    }
    if (a.contains("curves")) {
      const auto& g = a["curves"];
      only_keys(g, "analyses.curves", {"enabled", "dataset", "levels", "taus", "samples"});
      read(g, "enabled", c.curves.enabled, "analyses.curves");
      read(g, "dataset", c.curves.dataset, "analyses.curves");
      read(g, "levels", c.curves.levels, "analyses.curves");
      read(g, "taus", c.curves.taus, "analyses.curves");
      read(g, "samples", c.curves.samples, "analyses.curves");
    }
  }
  if (j.contains("synth")) {
    const auto& s = j["synth"];
    only_keys(s, "synth", {"mode", "source", "segment", "years", "customers", "length", "energy_lo", "energy_hi",
                           "alpha", "beta_lo", "beta_hi", "mean_lo", "mean_hi", "cv_lo", "cv_hi"});
    auto& y = c.synth;
    read(s, "mode", y.mode, "synth");
    read(s, "source", y.source, "synth");
    read(s, "segment", y.segment, "synth");
    read(s, "years", y.years, "synth");
    read(s, "customers", y.customers, "synth");
    read(s, "length", y.length, "synth");
    read(s, "energy_lo", y.energy_lo, "synth");
    read(s, "energy_hi", y.energy_hi, "synth");
    read(s, "alpha", y.alpha, "synth");
    read(s, "beta_lo", y.beta_lo, "synth");
    read(s, "beta_hi", y.beta_hi, "synth");
    read(s, "mean_lo", y.mean_lo, "synth");
    read(s, "mean_hi", y.mean_hi, "synth");
    read(s, "cv_lo", y.cv_lo, "synth");
    read(s, "cv_hi", y.cv_hi, "synth");
    if (!y.mode.empty() && y.mode != "moments" && y.mode != "velander" && y.mode != "gaussian") {
      throw UsageError("synth.mode must be moments, velander or gaussian");
    }
  }
  if (j.contains("verify")) {
    const auto& v = j["verify"];
    only_keys(v, "verify", {"dataset", "records", "levels", "budget"});
    read(v, "dataset", c.verify.dataset, "verify");
    read(v, "records", c.verify.records, "verify");
    read(v, "levels", c.verify.levels, "verify");
    read(v, "budget", c.verify.budget, "verify");
  }

  if (!(c.interval_minutes > 0.0)) throw UsageError("interval_minutes must be positive");
  if (!(c.tolerance > 0.0 && c.tolerance < 1.0)) throw UsageError("tolerance must lie in (0, 1)");
  try {
    (void)c.quantile_grid();
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(std::string("invalid quantile grid: ") + e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error&) {
    throw UsageError("cannot read config file " + path.string());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j, std::filesystem::absolute(path).parent_path());
}

json to_json(const RunConfig& c) {
  json inputs = json::array();
  for (const auto& in : c.inputs) {
    inputs.push_back({{"segment", in.segment}, {"year", in.year}, {"path", in.path.generic_string()}});
  }
  json splits = json::array();
  for (const auto& [t, s] : c.sld.splits) splits.push_back({band_json(t), band_json(s)});
  json j = {
      {"inputs", std::move(inputs)},
      {"interval_minutes", c.interval_minutes},
      {"expected_T", c.expected_T ? json(*c.expected_T) : json(nullptr)},
      {"grid", {{"lo", c.grid.lo}, {"hi", c.grid.hi}, {"step", c.grid.step}}},
      {"constraint", std::string(to_string(c.regime))},
      {"seed", c.seed ? json(*c.seed) : json(nullptr)},
      {"tolerance", c.tolerance},
      {"threads", c.threads},
      {"output_dir", c.output_dir.generic_string()},
      {"fit", {{"dataset", c.fit_dataset}}},
      {"analyses",
       {{"cv", {{"enabled", c.cv.enabled}, {"folds", c.cv.folds}}},
        {"tld", {{"enabled", c.tld}}},
        {"sld", {{"enabled", c.sld.enabled}, {"splits", std::move(splits)}}},
        {"aggregation",
         {{"enabled", c.aggregation.enabled},
          {"dataset", c.aggregation.dataset},
          {"levels", c.aggregation.levels},
          {"samples", c.aggregation.samples},
          {"folds", c.aggregation.folds}}},
        {"curves",
         {{"enabled", c.curves.enabled},
          {"dataset", c.curves.dataset},
          {"levels", c.curves.levels},
          {"taus", c.curves.taus},
          {"samples", c.curves.samples}}}}},
      {"synth",
       {{"mode", c.synth.mode},
        {"source", c.synth.source},
        {"segment", c.synth.segment},
        {"years", c.synth.years},
        {"customers", c.synth.customers},
        {"length", c.synth.length},
        {"energy_lo", c.synth.energy_lo},
        {"energy_hi", c.synth.energy_hi},
        {"alpha", c.synth.alpha},
        {"beta_lo", c.synth.beta_lo},
        {"beta_hi", c.synth.beta_hi},
        {"mean_lo", c.synth.mean_lo},
        {"mean_hi", c.synth.mean_hi},
        {"cv_lo", c.synth.cv_lo},
        {"cv_hi", c.synth.cv_hi}}},
      {"verify",
       {{"dataset", c.verify.dataset},
        {"records", c.verify.records},
        {"levels", c.verify.levels},
        {"budget", c.verify.budget}}},
  };
  return j;
}

}  // namespace velander::app
