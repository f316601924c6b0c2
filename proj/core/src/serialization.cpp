#include "velander/serialization.hpp"

#include <fmt/format.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace velander {

std::string format_double(double v) { return fmt::format("{}", v); }

nlohmann::json to_json(const QuantileParamSet& params) {
  params.check_shape();
  nlohmann::json j;
  j["constraint"] = std::string(to_string(params.regime));
  j["levels"] = params.grid.levels();
  j["alpha"] = params.alphas;
  j["beta"] = params.betas;
  j["fit_ec_range"] = {params.fit_ec_range.first, params.fit_ec_range.second};
  j["units"] = {{"energy", "kW-15min"}, {"load", "kW"}};
  return j;
}

QuantileParamSet params_from_json(const nlohmann::json& j) {
  try {
    QuantileParamSet p;
    p.regime = parse_regime(j.at("constraint").get<std::string>());
    p.grid = QuantileGrid(j.at("levels").get<std::vector<double>>());
    p.alphas = j.at("alpha").get<std::vector<double>>();
    p.betas = j.at("beta").get<std::vector<double>>();
    const auto range = j.at("fit_ec_range").get<std::vector<double>>();
    if (range.size() != 2) throw Error("fit_ec_range must hold two values");
    p.fit_ec_range = {range[0], range[1]};
    p.check_shape();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed parameter set: ") + e.what());
  }
}

nlohmann::json to_json(const CleaningReport& r) {
  nlohmann::json j;
  j["original"] = r.original;
  j["incomplete"] = r.incomplete;
  j["negative"] = r.negative;
  j["zero_first_week"] = r.zero_first_week;
  j["retained"] = r.retained;
  return j;
}

CleaningReport cleaning_report_from_json(const nlohmann::json& j) {
  try {
    CleaningReport r;
    r.original = j.at("original").get<std::size_t>();
    r.incomplete = j.at("incomplete").get<std::size_t>();
    r.negative = j.at("negative").get<std::size_t>();
    r.zero_first_week = j.at("zero_first_week").get<std::size_t>();
    r.retained = j.at("retained").get<std::size_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed cleaning report: ") + e.what());
  }
}

void write_records_csv(std::ostream& out, std::span<const CustomerRecord> records) {
  out << "customer_id,energy_kw15min,peak_kw,weight_level\n";
  for (const auto& r : records) {
    out << r.customer_id << ',' << format_double(r.energy) << ',' << format_double(r.peak) << ','
        << r.weight_level << '\n';
  }
}

namespace {

double parse_number(std::string_view s, const std::string& where) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) throw Error(where + ": malformed number '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::vector<CustomerRecord> read_records_csv(std::istream& in, const std::string& source_name) {
  std::string line;
  if (!std::getline(in, line)) throw Error(source_name + ": empty record table");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "customer_id,energy_kw15min,peak_kw,weight_level") {
    throw Error(source_name + ": unexpected record table header");
  }
  std::vector<CustomerRecord> records;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto where = source_name + " row " + std::to_string(row);
    std::vector<std::string_view> fields;
    std::string_view view(line);
    for (std::size_t pos = 0;;) {
      const auto comma = view.find(',', pos);
      fields.push_back(view.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (fields.size() != 4) throw Error(where + ": expected 4 fields");
    CustomerRecord r;
    r.customer_id = std::string(fields[0]);
    r.energy = parse_number(fields[1], where);
    r.peak = parse_number(fields[2], where);
    r.weight_level = static_cast<int>(parse_number(fields[3], where));
    if (r.energy < 0.0 || r.peak < 0.0 || r.weight_level < 1) throw Error(where + ": invalid record");
    records.push_back(std::move(r));
  }
  return records;
}

void write_meter_csv(std::ostream& out, std::span<const LoadProfile> profiles, int start_year) {
  using namespace std::chrono;
  const auto origin = sys_days{year{start_year} / January / 1};
  out << "customer_id,timestamp,load_kw\n";
  for (const auto& p : profiles) {
    const auto step = static_cast<long long>(p.interval_minutes);
    for (std::size_t t = 0; t < p.values.size(); ++t) {
      const sys_time<minutes> stamp = origin + minutes{static_cast<long long>(t) * step};
      const auto day = floor<days>(stamp);
      const year_month_day ymd{day};
      const auto minute_of_day = (stamp - day).count();
      out << p.customer_id << ','
          << fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:00Z", static_cast<int>(ymd.year()),
                         static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), minute_of_day / 60,
                         minute_of_day % 60)
          << ',' << format_double(p.values[t]) << '\n';
    }
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace velander
