#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "velander/evaluation.hpp"
#include "velander/ingest.hpp"
#include "velander/model.hpp"
#include "velander/synthetic.hpp"

namespace velander {
namespace {

Population random_population(std::size_t n, std::size_t T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<LoadProfile> ps;
  for (std::size_t i = 0; i < n; ++i) {
    LoadProfile p{"c" + std::to_string(i), std::vector<double>(T)};
    const double scale = 1.0 + static_cast<double>(i % 7);
    for (double& v : p.values) v = scale * u(rng);
    ps.push_back(std::move(p));
  }
  return Population(std::move(ps));
}

TEST(SampleAggregations, LevelOneReproducesIndividuals) {
  const auto pop = random_population(12, 48, 1);
  for (const auto& s : sample_aggregations(pop, 1, 30, 3)) {
    const auto& ind = pop.records()[s.members[0]];
    EXPECT_EQ(s.record.energy, ind.energy);
    EXPECT_EQ(s.record.peak, ind.peak);
    EXPECT_EQ(s.record.weight_level, 1);
  }
}

TEST(SampleAggregations, CoincidenceEffect) {
  const Population anti({{"a", {1, 0}}, {"b", {0, 1}}});
  const auto s = sample_aggregations(anti, 2, 1, 0);
  EXPECT_EQ(s[0].record.peak, 1.0);
  EXPECT_EQ(s[0].record.energy, 2.0);

  const Population same({{"a", {1, 0}}, {"b", {1, 0}}});
  EXPECT_EQ(sample_aggregations(same, 2, 1, 0)[0].record.peak, 2.0);
}

TEST(SampleAggregations, ArithmeticInvariants) {
  const auto pop = random_population(40, 96, 2);
  for (std::size_t level : {2u, 5u, 10u}) {
    for (const auto& s : sample_aggregations(pop, level, 200, 7)) {
      ASSERT_EQ(s.members.size(), level);
      EXPECT_EQ(std::set<std::size_t>(s.members.begin(), s.members.end()).size(), level);
      std::vector<double> e;
      double max_peak = 0.0, sum_peak = 0.0;
      for (std::size_t m : s.members) {
        e.push_back(pop.records()[m].energy);
        max_peak = std::max(max_peak, pop.records()[m].peak);
        sum_peak += pop.records()[m].peak;
      }
      EXPECT_EQ(s.record.energy, pairwise_sum(e));
      EXPECT_LE(max_peak, s.record.peak);
      EXPECT_LE(s.record.peak, sum_peak);
      EXPECT_EQ(s.record.weight_level, static_cast<int>(level));
      EXPECT_EQ(s.member_ids.size(), level);
    }
  }
}

TEST(SampleAggregations, PeakIsPeakOfSummedProfile) {
  const auto pop = random_population(10, 20, 4);
  for (const auto& s : sample_aggregations(pop, 3, 20, 5)) {
    std::vector<double> sum(20, 0.0);
    for (std::size_t m : s.members) {
      for (std::size_t t = 0; t < 20; ++t) sum[t] += pop.profiles()[m].values[t];
    }
    EXPECT_DOUBLE_EQ(s.record.peak, *std::max_element(sum.begin(), sum.end()));
  }
}

TEST(SampleAggregations, DeterministicAndThreadIndependent) {
  const auto pop = random_population(30, 24, 6);
  const auto a = sample_aggregations(pop, 4, 100, 9, 1);
  const auto b = sample_aggregations(pop, 4, 100, 9, 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].members, b[i].members);
    EXPECT_EQ(a[i].record.peak, b[i].record.peak);
  }
  const auto c = sample_aggregations(pop, 4, 100, 10, 1);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs = differs || a[i].members != c[i].members;
  EXPECT_TRUE(differs);
}

TEST(SampleAggregations, MembersAreUniform) {
  // every customer should appear about count * level / n times
  const auto pop = random_population(10, 4, 8);
  std::vector<int> hits(10, 0);
  for (const auto& s : sample_aggregations(pop, 3, 20000, 11)) {
    for (std::size_t m : s.members) ++hits[m];
  }
  for (int h : hits) EXPECT_NEAR(h, 6000, 6 * std::sqrt(6000.0));
}

TEST(SampleAggregations, RejectsBadLevel) {
  const auto pop = random_population(5, 4, 1);
  EXPECT_THROW(sample_aggregations(pop, 6, 1, 0), Error);
  EXPECT_THROW(sample_aggregations(pop, 0, 1, 0), Error);
}

TEST(Population, RejectsMixedShapes) {
  EXPECT_THROW(Population({{"a", {1, 2}}, {"b", {1, 2, 3}}}), Error);
  EXPECT_THROW(Population({{"a", {1, 2}, 15.0}, {"b", {1, 2}, 60.0}}), Error);
}

TEST(AggregationCv, IdenticalCustomersScaleExactly) {
  // l identical customers aggregate to l times one of them: every record of a
  // level is the same point, so the normalized loss is 0 at every level.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 5);
  LoadProfile one{"k", std::vector<double>(16)};
  for (double& x : one.values) x = u(rng);
  std::vector<LoadProfile> clones(30, one);
  for (std::size_t i = 0; i < clones.size(); ++i) clones[i].customer_id = "k" + std::to_string(i);
  const Population pop(clones);
  const std::vector<int> levels{2, 5};
  const auto rows = aggregation_cv(pop, levels, QuantileGrid({0.5}), Regime::C1, 1, 50, 5);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_NEAR(rows[0].mean_test_apl_normalized, 0.0, 1e-9);
  EXPECT_NEAR(rows[1].mean_test_apl_normalized, 0.0, 1e-9);
}

TEST(AggregationCv, NormalizedByLevel) {
  const auto pop = random_population(50, 96, 12);
  const std::vector<int> levels{2, 4};
  const auto rows = aggregation_cv(pop, levels, QuantileGrid({0.25, 0.5, 0.75}), Regime::C4, 3, 100, 5);
  for (const auto& r : rows) {
    EXPECT_EQ(r.samples, 100u);
    EXPECT_DOUBLE_EQ(r.mean_test_apl_normalized * r.level, r.cv.mean_test_apl);
    EXPECT_DOUBLE_EQ(r.mean_train_apl_normalized * r.level, r.cv.mean_train_apl);
  }
}

TEST(BandRestrictedFit, LevelOneUsesIndividualsInBand) {
  const auto pop = random_population(60, 96, 13);
  const auto grid = QuantileGrid({0.2, 0.5, 0.8});
  const auto a = band_restricted_fit(pop, 1, grid, Regime::C4, 1);
  const auto b = band_restricted_fit(pop, 1, grid, Regime::C4, 2);
  EXPECT_EQ(a.sampled, 60u);
  EXPECT_EQ(a.band_lo, ec_percentile(pop.records(), 40));
  EXPECT_EQ(a.band_hi, ec_percentile(pop.records(), 60));
  EXPECT_NEAR(a.train_apl, b.train_apl, 1e-7 * a.train_apl);
}

TEST(BandRestrictedFit, SampledLevelsStayInBand) {
  const auto pop = random_population(60, 96, 14);
  const auto grid = QuantileGrid({0.2, 0.5, 0.8});
  for (int level : {2, 3}) {
    const auto fit_l = band_restricted_fit(pop, level, grid, Regime::C4, 5);
    EXPECT_EQ(fit_l.sampled, (level == 2 ? 4u : 16u) * 60u);
    EXPECT_GT(fit_l.retained, 0u);
    EXPECT_LE(fit_l.params.fit_ec_range.second, fit_l.band_hi);
    EXPECT_GE(fit_l.params.fit_ec_range.first, fit_l.band_lo);
  }
  EXPECT_THROW(band_restricted_fit(pop, 4, grid, Regime::C4, 5), Error);
}

TEST(BandRestrictedFit, EmptyBandReportsSampleCount) {
  // pairs of equal customers all sum to twice the individual band
  std::vector<LoadProfile> ps(20, LoadProfile{"x", {1, 1}});
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i].customer_id = "x" + std::to_string(i);
  const Population pop(ps);
  try {
    band_restricted_fit(pop, 2, QuantileGrid({0.5}), Regime::C1, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("80 sampled"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace velander
