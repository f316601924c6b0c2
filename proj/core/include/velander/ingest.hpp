#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "velander/types.hpp"

namespace velander {

// A meter export: rows of `customer_id,timestamp,load_kw`, one file per
// segment and year.
struct RawMeterFile {
  std::filesystem::path path;
  int year = 0;
  std::string segment;
};

struct MeterCsvOptions {
  double interval_minutes = kReferenceIntervalMinutes;
};

// One profile per customer, ordered by customer id. Readings are placed on
// the interval grid starting at the customer's first timestamp; intervals
// with no row (or an empty / NA load field) hold NaN so that cleaning can
// reject the profile as incomplete.
std::vector<LoadProfile> parse_meter_csv(std::istream& in,
                                         const MeterCsvOptions& options = {},
                                         const std::string& source_name = "<stream>");
std::vector<LoadProfile> parse_meter_csv(const RawMeterFile& file,
                                         const MeterCsvOptions& options = {});

// Per-rule removal tally; a profile failing several rules is counted once
// under the first rule in the order incomplete, negative, zero_first_week.
struct CleaningReport {
  std::size_t original = 0;
  std::size_t incomplete = 0;
  std::size_t negative = 0;
  std::size_t zero_first_week = 0;
  std::size_t retained = 0;

  friend bool operator==(const CleaningReport&, const CleaningReport&) = default;
};

struct CleaningResult {
  std::vector<LoadProfile> profiles;
  CleaningReport report;
};

inline constexpr std::size_t kFirstWeekIntervals = 672;

CleaningResult clean_profiles(std::vector<LoadProfile> profiles, std::size_t expected_length);

bool is_leap_year(int year);
int days_in_year(int year);
// Number of readings a complete profile of `year` holds.
std::size_t expected_intervals(int year, double interval_minutes = kReferenceIntervalMinutes);

// Scales every energy by 365/366 when `year` is a leap year.
std::vector<CustomerRecord> leap_year_adjust(std::vector<CustomerRecord> records, int year);

// a-th percentile (a in [0, 100]) by linear interpolation between order
// statistics at rank (n - 1) * a / 100.
double ec_percentile(std::span<const CustomerRecord> records, double a);
double percentile(std::vector<double> values, double a);

}  // namespace velander
