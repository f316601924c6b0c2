#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "velander/ingest.hpp"
#include "velander/types.hpp"

namespace velander {

// {"constraint": "C4", "levels": [...], "alpha": [...], "beta": [...],
//  "fit_ec_range": [lo, hi], "units": {"energy": "kW-15min", "load": "kW"}}
nlohmann::json to_json(const QuantileParamSet& params);
QuantileParamSet params_from_json(const nlohmann::json& j);

// {"original": n, "incomplete": a, "negative": b, "zero_first_week": c, "retained": r}
nlohmann::json to_json(const CleaningReport& report);
CleaningReport cleaning_report_from_json(const nlohmann::json& j);

// Record tables: `customer_id,energy_kw15min,peak_kw,weight_level`.
void write_records_csv(std::ostream& out, std::span<const CustomerRecord> records);
std::vector<CustomerRecord> read_records_csv(std::istream& in, const std::string& source_name = "<stream>");

// Profiles in the meter schema, timestamps starting at `start_year`-01-01
// 00:00Z and advancing by each profile's interval.
void write_meter_csv(std::ostream& out, std::span<const LoadProfile> profiles, int start_year);

// Shortest text that parses back to the same double.
std::string format_double(double v);

// Whole-file helpers; throw Error on I/O failure.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace velander
