#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "velander/evaluation.hpp"
#include "velander/ingest.hpp"
#include "velander/model.hpp"
#include "velander/parallel.hpp"

namespace velander {

Population::Population(std::vector<LoadProfile> profiles) : profiles_(std::move(profiles)) {
  records_.reserve(profiles_.size());
  for (const auto& p : profiles_) {
    if (p.values.size() != profiles_.front().values.size() ||
        p.interval_minutes != profiles_.front().interval_minutes) {
      throw Error("population profiles must share length and interval");
    }
    records_.push_back(compute_features(p));
  }
}

std::vector<AggregationSample> sample_aggregations(const Population& population, std::size_t level,
                                                   std::size_t count, std::uint64_t seed, unsigned threads) {
  const std::size_t n = population.size();
  if (level == 0) throw Error("aggregation level must be at least 1");
  if (level > n) {
    throw Error("aggregation level " + std::to_string(level) + " exceeds population of " + std::to_string(n));
  }
  std::vector<AggregationSample> out(count);
  parallel_for(count, threads, [&](std::size_t s) {
    std::mt19937_64 rng(derive_seed(seed, s));
    // Partial Fisher-Yates: the first `level` slots are a uniform subset.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < level; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    AggregationSample& sample = out[s];
    sample.level = static_cast<int>(level);
    sample.members.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(level));

    const auto& profiles = population.profiles();
    std::vector<double> summed(profiles[sample.members.front()].values);
    std::vector<double> energies;
    energies.reserve(level);
    for (std::size_t m = 0; m < level; ++m) {
      const std::size_t idx = sample.members[m];
      sample.member_ids.push_back(profiles[idx].customer_id);
      energies.push_back(population.records()[idx].energy);
      if (m == 0) continue;
      const auto& v = profiles[idx].values;
      for (std::size_t t = 0; t < summed.size(); ++t) summed[t] += v[t];
    }
    sample.record.customer_id = "agg" + std::to_string(level) + "-" + std::to_string(s);
    sample.record.weight_level = static_cast<int>(level);
    sample.record.energy = pairwise_sum(energies);
    sample.record.peak = *std::max_element(summed.begin(), summed.end());
  });
  return out;
}

std::vector<AggregationRow> aggregation_cv(const Population& population, std::span<const int> levels,
                                           const QuantileGrid& grid, Regime regime, std::uint64_t seed,
                                           std::size_t samples, std::size_t folds,
                                           const EvaluationOptions& options) {
  std::vector<AggregationRow> rows;
  for (int level : levels) {
    if (level < 1) throw Error("aggregation level must be at least 1");
    const auto unit = static_cast<std::uint64_t>(level);
    const auto drawn = sample_aggregations(population, static_cast<std::size_t>(level), samples,
                                           derive_seed(seed, 2 * unit), options.threads);
    std::vector<CustomerRecord> records;
    records.reserve(drawn.size());
    for (const auto& s : drawn) records.push_back(s.record);
    AggregationRow row;
    row.level = level;
    row.samples = drawn.size();
    row.cv = kfold_cv(records, grid, regime, folds, derive_seed(seed, 2 * unit + 1), options);
    row.mean_train_apl_normalized = row.cv.mean_train_apl / level;
    row.mean_test_apl_normalized = row.cv.mean_test_apl / level;
    rows.push_back(std::move(row));
  }
  return rows;
}

BandFit band_restricted_fit(const Population& population, int level, const QuantileGrid& grid, Regime regime,
                            std::uint64_t seed, const EvaluationOptions& options) {
  if (level < 1 || level > 3) throw Error("band-restricted fits are defined for levels 1, 2 and 3");
  const auto& individuals = population.records();
  BandFit out;
  out.level = level;
  out.band_lo = ec_percentile(individuals, 40.0);
  out.band_hi = ec_percentile(individuals, 60.0);

  std::vector<CustomerRecord> candidates;
  if (level == 1) {
    candidates = individuals;
  } else {
    const std::size_t count = (level == 2 ? 4 : 16) * population.size();
    for (auto& s : sample_aggregations(population, static_cast<std::size_t>(level), count, seed, options.threads)) {
      candidates.push_back(std::move(s.record));
    }
  }
  out.sampled = candidates.size();
  std::vector<CustomerRecord> band;
  for (auto& r : candidates) {
    if (r.energy >= out.band_lo && r.energy <= out.band_hi) band.push_back(std::move(r));
  }
  out.retained = band.size();
  if (band.empty()) {
    throw Error("no level-" + std::to_string(level) + " sample falls in [E40, E60] (" + std::to_string(out.sampled) +
                " sampled)");
  }
  const auto result = fit(FitProblem(std::move(band), grid, regime, options.tolerance));
  out.params = result.params;
  out.train_apl = result.achieved_apl;
  return out;
}

}  // namespace velander
