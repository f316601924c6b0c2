#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "velander/solver.hpp"
#include "velander/types.hpp"

namespace velander {

struct EvaluationOptions {
  double tolerance = 1e-7;
  unsigned threads = 1;  // 0 = hardware concurrency
};

// ---- cross-validation -------------------------------------------------------

struct FoldResult {
  std::size_t fold = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  double train_apl = 0.0;
  double test_apl = 0.0;
};

struct CvReport {
  Regime regime = Regime::C1;
  std::size_t folds = 0;
  std::uint64_t seed = 0;
  std::vector<FoldResult> per_fold;
  double mean_train_apl = 0.0;
  double mean_test_apl = 0.0;
};

// Index sets of the k folds: one seeded shuffle, then contiguous blocks; the
// first n mod k folds hold one extra record.
std::vector<std::vector<std::size_t>> fold_partition(std::size_t n, std::size_t k, std::uint64_t seed);

CvReport kfold_cv(std::span<const CustomerRecord> records, const QuantileGrid& grid, Regime regime,
                  std::size_t k, std::uint64_t seed, const EvaluationOptions& options = {});

// ---- synthetic Gaussian baseline -------------------------------------------

// Mean and population variance (divided by T) of one profile.
struct ProfileMoments {
  std::string customer_id;
  double mean = 0.0;
  double variance = 0.0;
  std::size_t length = 0;
  double interval_minutes = 15.0;
};

ProfileMoments profile_moments(const LoadProfile& profile);

// T i.i.d. draws from N(mean, variance) per customer. Negative draws are kept.
std::vector<LoadProfile> gaussian_profiles(std::span<const ProfileMoments> moments, std::uint64_t seed,
                                           unsigned threads = 1);
std::vector<LoadProfile> synth_gaussian_profiles(std::span<const LoadProfile> source, std::uint64_t seed,
                                                 unsigned threads = 1);

// ---- transfer losses --------------------------------------------------------

struct TransferResult {
  double apl_transfer = 0.0;  // target records under the transferred parameters
  double apl_optimal = 0.0;   // target records under their own optimum
  double loss_difference = 0.0;
  QuantileParamSet optimal;
};

// Temporal loss difference of parameters fitted on an earlier period,
// applied to `target_records`.
TransferResult tld(std::span<const CustomerRecord> target_records, const QuantileGrid& grid, Regime regime,
                   const QuantileParamSet& earlier, const EvaluationOptions& options = {});

// Percentile band [a, b] of the EC distribution; membership is
// E_a <= E < E_b, with the top band (b = 100) closed at the maximum.
struct PercentileBand {
  double lo = 0.0;
  double hi = 100.0;
};

std::vector<CustomerRecord> select_band(std::span<const CustomerRecord> records, PercentileBand band);

struct SldResult {
  PercentileBand target;
  PercentileBand source;
  std::size_t target_size = 0;
  std::size_t source_size = 0;
  TransferResult transfer;
};

// Scaling loss difference: parameters fitted on `source` evaluated on `target`.
SldResult sld(std::span<const CustomerRecord> records, const QuantileGrid& grid, Regime regime,
              PercentileBand target, PercentileBand source, const EvaluationOptions& options = {});

// ---- aggregation ------------------------------------------------------------

// Profiles with their individual records precomputed.
class Population {
 public:
  explicit Population(std::vector<LoadProfile> profiles);
  const std::vector<LoadProfile>& profiles() const { return profiles_; }
  const std::vector<CustomerRecord>& records() const { return records_; }
  std::size_t size() const { return profiles_.size(); }

 private:
  std::vector<LoadProfile> profiles_;
  std::vector<CustomerRecord> records_;
};

struct AggregationSample {
  int level = 1;
  std::vector<std::size_t> members;  // indices into the population
  std::vector<std::string> member_ids;
  CustomerRecord record;  // energy = sum of member ECs, peak = peak of the summed profile
};

// `count` independent groups of `level` distinct customers.
std::vector<AggregationSample> sample_aggregations(const Population& population, std::size_t level,
                                                   std::size_t count, std::uint64_t seed, unsigned threads = 1);

struct AggregationRow {
  int level = 0;
  std::size_t samples = 0;
  double mean_train_apl_normalized = 0.0;  // kW per customer
  double mean_test_apl_normalized = 0.0;
  CvReport cv;
};

std::vector<AggregationRow> aggregation_cv(const Population& population, std::span<const int> levels,
                                           const QuantileGrid& grid, Regime regime, std::uint64_t seed,
                                           std::size_t samples = 1000, std::size_t folds = 5,
                                           const EvaluationOptions& options = {});

struct BandFit {
  int level = 1;
  double band_lo = 0.0;  // E_40 of the individual ECs
  double band_hi = 0.0;  // E_60
  std::size_t sampled = 0;
  std::size_t retained = 0;
  QuantileParamSet params;
  double train_apl = 0.0;
};

// Fit on individuals (level 1) or on 4|C| / 16|C| sampled pairs / triples
// (levels 2 / 3) whose EC lies within [E_40, E_60] of the individuals.
BandFit band_restricted_fit(const Population& population, int level, const QuantileGrid& grid, Regime regime,
                            std::uint64_t seed, const EvaluationOptions& options = {});

// ---- curve export -----------------------------------------------------------

struct CurvePoint {
  enum class Kind { Curve, Cdf };
  int level = 1;
  Kind kind = Kind::Curve;
  double tau = 0.0;
  double energy = 0.0;  // fixed EC of a CDF point; unused for curves
  double x = 0.0;
  double y = 0.0;
};

struct CurveExport {
  std::vector<CurvePoint> points;
  std::vector<std::string> warnings;
};

// QR curves y = alpha_tau x + beta_tau sqrt(x) on `samples` points of
// [x_lo, x_hi] for each curve tau, and truncated CDF points
// (alpha_tau E + beta_tau sqrt(E), tau) over the whole grid for each E.
CurveExport export_curves(const std::map<int, QuantileParamSet>& params_by_level, std::span<const double> ec_points,
                          std::span<const double> curve_taus, double x_lo, double x_hi, std::size_t samples = 50);

}  // namespace velander
