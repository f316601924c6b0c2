#include "velander/ingest.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <string_view>

namespace velander {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      return fields;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

bool parse_int(std::string_view s, int& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

// Minutes since 1970-01-01T00:00Z. Accepts `YYYY-MM-DD[T ]HH:MM[:SS]` with an
// optional `Z` or `+HH:MM` / `-HH:MM` suffix; seconds must be zero.
bool parse_timestamp(std::string_view s, std::int64_t& minutes) {
  if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':') {
    return false;
  }
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), mo) || !parse_int(s.substr(8, 2), d) ||
      !parse_int(s.substr(11, 2), h) || !parse_int(s.substr(14, 2), mi)) {
    return false;
  }
  std::string_view rest = s.substr(16);
  if (!rest.empty() && rest.front() == ':') {
    if (rest.size() < 3 || !parse_int(rest.substr(1, 2), sec)) return false;
    rest.remove_prefix(3);
    if (!rest.empty() && rest.front() == '.') {
      rest.remove_prefix(1);
      while (!rest.empty() && rest.front() == '0') rest.remove_prefix(1);
    }
  }
  int offset = 0;
  if (rest == "Z") {
    rest = {};
  } else if (!rest.empty() && (rest.front() == '+' || rest.front() == '-')) {
    int oh = 0, om = 0;
    if (rest.size() != 6 || rest[3] != ':' || !parse_int(rest.substr(1, 2), oh) ||
        !parse_int(rest.substr(4, 2), om)) {
      return false;
    }
    offset = (rest.front() == '-' ? -1 : 1) * (oh * 60 + om);
    rest = {};
  }
  if (!rest.empty() || sec != 0 || h > 23 || mi > 59) return false;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return false;
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  minutes = static_cast<std::int64_t>(days) * 1440 + h * 60 + mi - offset;
  return true;
}

bool is_missing_marker(std::string_view s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null";
}

}  // namespace

std::vector<LoadProfile> parse_meter_csv(std::istream& in, const MeterCsvOptions& options,
                                         const std::string& source_name) {
  if (!(options.interval_minutes > 0.0) || std::floor(options.interval_minutes) != options.interval_minutes) {
    throw Error("interval duration must be a positive whole number of minutes");
  }
  const auto step = static_cast<std::int64_t>(options.interval_minutes);

  std::string line;
  std::size_t row = 0;
  bool have_header = false;
  std::map<std::string, std::vector<std::pair<std::int64_t, double>>> rows_by_customer;
  std::map<std::string, std::map<std::int64_t, std::string>> raw_stamp;

  while (std::getline(in, line)) {
    ++row;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    if (!have_header) {
      if (row == 1 && view.size() >= 3 && static_cast<unsigned char>(view[0]) == 0xEF) view.remove_prefix(3);
      const auto header = split(view);
      if (header.size() != 3 || header[0] != "customer_id" || header[1] != "timestamp" || header[2] != "load_kw") {
        throw Error(source_name + ": expected header 'customer_id,timestamp,load_kw'");
      }
      have_header = true;
      continue;
    }
    const auto fields = split(view);
    const auto where = source_name + " row " + std::to_string(row);
    if (fields.size() != 3 || fields[0].empty()) throw Error(where + ": malformed row");
    std::int64_t minute = 0;
    if (!parse_timestamp(fields[1], minute)) {
      throw Error(where + ": malformed timestamp '" + std::string(fields[1]) + "'");
    }
    double value = std::numeric_limits<double>::quiet_NaN();
    if (!is_missing_marker(fields[2])) {
      const auto* end = fields[2].data() + fields[2].size();
      auto [ptr, ec] = std::from_chars(fields[2].data(), end, value);
      if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
        throw Error(where + ": malformed load value '" + std::string(fields[2]) + "'");
      }
    }
    std::string id(fields[0]);
    auto [it, inserted] = raw_stamp[id].emplace(minute, std::string(fields[1]));
    if (!inserted) {
      throw Error(where + ": duplicate reading for customer " + id + " at " + std::string(fields[1]));
    }
    rows_by_customer[id].emplace_back(minute, value);
  }

  if (!have_header) {
    spdlog::warn("{}: empty meter file", source_name);
    return {};
  }

  std::vector<LoadProfile> profiles;
  profiles.reserve(rows_by_customer.size());
  for (auto& [id, rows] : rows_by_customer) {
    std::sort(rows.begin(), rows.end());
    const std::int64_t first = rows.front().first;
    const std::int64_t last = rows.back().first;
    LoadProfile profile;
    profile.customer_id = id;
    profile.interval_minutes = options.interval_minutes;
    profile.values.assign(static_cast<std::size_t>((last - first) / step + 1),
                          std::numeric_limits<double>::quiet_NaN());
    for (const auto& [minute, value] : rows) {
      if ((minute - first) % step != 0) {
        throw Error(source_name + ": timestamp " + raw_stamp[id][minute] + " of customer " + id +
                    " is not on the " + std::to_string(step) + "-minute grid");
      }
      profile.values[static_cast<std::size_t>((minute - first) / step)] = value;
    }
    profiles.push_back(std::move(profile));
  }
  return profiles;
}

std::vector<LoadProfile> parse_meter_csv(const RawMeterFile& file, const MeterCsvOptions& options) {
  std::ifstream in(file.path);
  if (!in) throw Error("cannot open meter file " + file.path.string());
  return parse_meter_csv(in, options, file.path.string());
}

CleaningResult clean_profiles(std::vector<LoadProfile> profiles, std::size_t expected_length) {
  CleaningResult result;
  result.report.original = profiles.size();
  for (auto& profile : profiles) {
    const auto& v = profile.values;
    const bool incomplete = v.size() != expected_length ||
                            std::any_of(v.begin(), v.end(), [](double x) { return !std::isfinite(x); });
    if (incomplete) {
      ++result.report.incomplete;
      continue;
    }
    if (std::any_of(v.begin(), v.end(), [](double x) { return x < 0.0; })) {
      ++result.report.negative;
      continue;
    }
    const std::size_t head = std::min(kFirstWeekIntervals, v.size());
    if (std::all_of(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(head), [](double x) { return x == 0.0; })) {
      ++result.report.zero_first_week;
      continue;
    }
    result.profiles.push_back(std::move(profile));
  }
  result.report.retained = result.profiles.size();
  return result;
}

bool is_leap_year(int year) {
  return std::chrono::year{year}.is_leap();
}

int days_in_year(int year) { return is_leap_year(year) ? 366 : 365; }

std::size_t expected_intervals(int year, double interval_minutes) {
  if (!(interval_minutes > 0.0)) throw Error("interval duration must be positive");
  return static_cast<std::size_t>(std::llround(days_in_year(year) * 1440.0 / interval_minutes));
}

std::vector<CustomerRecord> leap_year_adjust(std::vector<CustomerRecord> records, int year) {
  if (!is_leap_year(year)) return records;
  for (auto& r : records) r.energy = r.energy * 365.0 / 366.0;
  return records;
}

double percentile(std::vector<double> values, double a) {
  if (values.empty()) throw Error("percentile of an empty set");
  if (!(a >= 0.0 && a <= 100.0)) throw Error("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double rank = (static_cast<double>(values.size()) - 1.0) * a / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  if (frac == 0.0) return values[lo];
  return values[lo] + frac * (values[hi] - values[lo]);
}

double ec_percentile(std::span<const CustomerRecord> records, double a) {
  std::vector<double> energies;
  energies.reserve(records.size());
  for (const auto& r : records) energies.push_back(r.energy);
  return percentile(std::move(energies), a);
}

}  // namespace velander
