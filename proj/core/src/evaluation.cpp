#include "velander/evaluation.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "velander/ingest.hpp"
#include "velander/model.hpp"
#include "velander/parallel.hpp"
#include "velander/serialization.hpp"

namespace velander {

std::vector<std::vector<std::size_t>> fold_partition(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error("cross-validation needs at least 2 folds");
  if (k > n) throw Error("more folds (" + std::to_string(k) + ") than records (" + std::to_string(n) + ")");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                    order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return folds;
}

CvReport kfold_cv(std::span<const CustomerRecord> records, const QuantileGrid& grid, Regime regime, std::size_t k,
                  std::uint64_t seed, const EvaluationOptions& options) {
  const auto folds = fold_partition(records.size(), k, seed);
  CvReport report;
  report.regime = regime;
  report.folds = k;
  report.seed = seed;
  report.per_fold.resize(k);

  parallel_for(k, options.threads, [&](std::size_t f) {
    std::vector<char> held_out(records.size(), 0);
    for (std::size_t i : folds[f]) held_out[i] = 1;
    std::vector<CustomerRecord> train, test;
    for (std::size_t i = 0; i < records.size(); ++i) (held_out[i] ? test : train).push_back(records[i]);
    const auto result = fit(FitProblem(train, grid, regime, options.tolerance));
    FoldResult& out = report.per_fold[f];
    out.fold = f;
    out.train_size = train.size();
    out.test_size = test.size();
    out.train_apl = result.achieved_apl;
    out.test_apl = average_pinball_loss(test, result.params);
  });

  double train = 0.0, test = 0.0;
  for (const auto& f : report.per_fold) {
    train += f.train_apl;
    test += f.test_apl;
  }
  report.mean_train_apl = train / static_cast<double>(k);
  report.mean_test_apl = test / static_cast<double>(k);
  return report;
}

ProfileMoments profile_moments(const LoadProfile& profile) {
  if (profile.values.empty()) throw Error("empty profile");
  ProfileMoments m;
  m.customer_id = profile.customer_id;
  m.length = profile.values.size();
  m.interval_minutes = profile.interval_minutes;
  // A flat profile is reported exactly; summation noise would otherwise turn
  // it into a tiny nonzero variance.
  const auto& v = profile.values;
  if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); })) {
    m.mean = v.front();
    return m;
  }
  const double T = static_cast<double>(m.length);
  m.mean = pairwise_sum(profile.values) / T;
  std::vector<double> sq(profile.values.size());
  for (std::size_t t = 0; t < sq.size(); ++t) {
    const double d = profile.values[t] - m.mean;
    sq[t] = d * d;
  }
  m.variance = pairwise_sum(sq) / T;
  return m;
}

std::vector<LoadProfile> gaussian_profiles(std::span<const ProfileMoments> moments, std::uint64_t seed,
                                           unsigned threads) {
  std::vector<LoadProfile> out(moments.size());
  parallel_for(moments.size(), threads, [&](std::size_t i) {
    const auto& m = moments[i];
    if (!(m.variance >= 0.0)) throw Error("negative variance for " + m.customer_id);
    LoadProfile& p = out[i];
    p.customer_id = m.customer_id;
    p.interval_minutes = m.interval_minutes;
    p.values.resize(m.length);
    if (m.variance == 0.0) {
      std::fill(p.values.begin(), p.values.end(), m.mean);
      return;
    }
    std::mt19937_64 rng(derive_seed(seed, i));
    std::normal_distribution<double> normal(m.mean, std::sqrt(m.variance));
    for (double& v : p.values) v = normal(rng);
  });
  return out;
}

std::vector<LoadProfile> synth_gaussian_profiles(std::span<const LoadProfile> source, std::uint64_t seed,
                                                 unsigned threads) {
  std::vector<ProfileMoments> moments;
  moments.reserve(source.size());
  for (const auto& p : source) moments.push_back(profile_moments(p));
  return gaussian_profiles(moments, seed, threads);
}

namespace {

FitResult fit_records(std::span<const CustomerRecord> records, const QuantileGrid& grid, Regime regime,
                      const EvaluationOptions& options) {
  return fit(FitProblem(std::vector<CustomerRecord>(records.begin(), records.end()), grid, regime,
                        options.tolerance));
}

TransferResult transfer(std::span<const CustomerRecord> target, const QuantileParamSet& transferred,
                        FitResult optimum) {
  TransferResult out;
  out.apl_optimal = optimum.achieved_apl;
  // An interpolating optimum leaves only rounding noise in the loss.
  double mean_peak = 0.0;
  for (const auto& r : target) mean_peak += std::abs(r.peak);
  mean_peak /= static_cast<double>(target.size());
  if (out.apl_optimal <= 1e-12 * mean_peak) throw Error("zero optimal loss");
  out.apl_transfer = average_pinball_loss(target, transferred);
  out.loss_difference = out.apl_transfer / out.apl_optimal - 1.0;
  out.optimal = std::move(optimum.params);
  return out;
}

}  // namespace

TransferResult tld(std::span<const CustomerRecord> target_records, const QuantileGrid& grid, Regime regime,
                   const QuantileParamSet& earlier, const EvaluationOptions& options) {
  if (!(earlier.grid == grid) || earlier.regime != regime) {
    throw Error("earlier parameters were fitted under a different grid or regime");
  }
  return transfer(target_records, earlier, fit_records(target_records, grid, regime, options));
}

std::vector<CustomerRecord> select_band(std::span<const CustomerRecord> records, PercentileBand band) {
  if (!(band.lo >= 0.0 && band.lo < band.hi && band.hi <= 100.0)) throw Error("invalid percentile band");
  const double lo = ec_percentile(records, band.lo);
  const double hi = ec_percentile(records, band.hi);
  std::vector<CustomerRecord> out;
  for (const auto& r : records) {
    if (r.energy >= lo && (r.energy < hi || (band.hi == 100.0 && r.energy <= hi))) out.push_back(r);
  }
  return out;
}

SldResult sld(std::span<const CustomerRecord> records, const QuantileGrid& grid, Regime regime,
              PercentileBand target, PercentileBand source, const EvaluationOptions& options) {
  auto band_name = [](PercentileBand b) {
    return "C(" + std::to_string(b.lo) + "," + std::to_string(b.hi) + ")";
  };
  const auto target_set = select_band(records, target);
  if (target_set.empty()) throw Error("band " + band_name(target) + " is empty");
  const auto source_set = select_band(records, source);
  if (source_set.empty()) throw Error("band " + band_name(source) + " is empty");

  SldResult out;
  out.target = target;
  out.source = source;
  out.target_size = target_set.size();
  out.source_size = source_set.size();
  auto target_fit = fit_records(target_set, grid, regime, options);
  const bool same = target.lo == source.lo && target.hi == source.hi;
  const QuantileParamSet source_params = same ? target_fit.params : fit_records(source_set, grid, regime, options).params;
  out.transfer = transfer(target_set, source_params, std::move(target_fit));
  return out;
}

CurveExport export_curves(const std::map<int, QuantileParamSet>& params_by_level, std::span<const double> ec_points,
                          std::span<const double> curve_taus, double x_lo, double x_hi, std::size_t samples) {
  CurveExport out;
  if (params_by_level.empty()) return out;
  if (samples < 2 || !(x_hi > x_lo) || x_lo < 0.0) throw Error("invalid curve sampling range");
  const auto& grid = params_by_level.begin()->second.grid;
  for (const auto& [level, params] : params_by_level) {
    params.check_shape();
    if (!(params.grid == grid)) throw Error("parameter sets do not share a quantile grid");
  }

  std::vector<std::size_t> curve_levels;
  for (double tau : curve_taus) {
    if (auto k = grid.find(tau)) {
      curve_levels.push_back(*k);
    } else {
      const std::size_t k2 = grid.nearest(tau);
      out.warnings.push_back("tau " + format_double(tau) + " not in grid; using " + format_double(grid[k2]));
      spdlog::warn("{}", out.warnings.back());
      curve_levels.push_back(k2);
    }
  }

  for (const auto& [level, params] : params_by_level) {
    for (std::size_t k : curve_levels) {
      for (std::size_t s = 0; s < samples; ++s) {
        const double x = x_lo + (x_hi - x_lo) * static_cast<double>(s) / static_cast<double>(samples - 1);
        out.points.push_back({level, CurvePoint::Kind::Curve, grid[k], 0.0, x, params.predict(k, x)});
      }
    }
    for (double e : ec_points) {
      for (std::size_t k = 0; k < grid.size(); ++k) {
        out.points.push_back({level, CurvePoint::Kind::Cdf, grid[k], e, params.predict(k, e), grid[k]});
      }
    }
  }
  return out;
}

}  // namespace velander
