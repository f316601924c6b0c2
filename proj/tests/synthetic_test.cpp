#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "velander/model.hpp"
#include "velander/synthetic.hpp"

namespace velander {
namespace {

TEST(VelanderSurface, RecordsFollowTheGenerativeModel) {
  VelanderSurfaceSpec spec;
  spec.customers = 2000;
  const auto records = velander_surface_records(spec, 1);
  ASSERT_EQ(records.size(), 2000u);
  for (const auto& r : records) {
    EXPECT_GE(r.energy, spec.energy_lo);
    EXPECT_LE(r.energy, spec.energy_hi);
    const double b = (r.peak - spec.alpha * r.energy) / std::sqrt(r.energy);
    EXPECT_GE(b, spec.beta_lo - 1e-9);
    EXPECT_LE(b, spec.beta_hi + 1e-9);
  }
}

TEST(VelanderSurface, EnergyIsLogUniform) {
  VelanderSurfaceSpec spec;
  spec.customers = 20000;
  const auto records = velander_surface_records(spec, 2);
  // each decade of [1e3, 1e6] should hold a third of the customers
  std::size_t low = 0;
  for (const auto& r : records) low += r.energy < 1e4;
  EXPECT_NEAR(static_cast<double>(low) / 20000.0, 1.0 / 3.0, 0.015);
}

TEST(VelanderSurface, BetaQuantile) {
  VelanderSurfaceSpec spec;
  EXPECT_EQ(spec.beta_quantile(0.0), 1.0);
  EXPECT_EQ(spec.beta_quantile(0.5), 2.0);
  EXPECT_EQ(spec.beta_quantile(1.0), 3.0);
}

TEST(VelanderSurface, ProfilesReproduceRecords) {
  VelanderSurfaceSpec spec;
  spec.customers = 50;
  const std::size_t T = 35040;
  const auto records = velander_surface_records(spec, 3);
  const auto profiles = velander_surface_profiles(spec, T, 3);
  ASSERT_EQ(profiles.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto f = compute_features(profiles[i]);
    EXPECT_EQ(f.customer_id, records[i].customer_id);
    EXPECT_EQ(f.peak, records[i].peak);
    EXPECT_NEAR(f.energy, records[i].energy, 1e-9 * records[i].energy);
  }
}

TEST(VelanderSurface, RejectsImpossibleProfiles) {
  VelanderSurfaceSpec spec;
  spec.energy_lo = 1.0;
  spec.energy_hi = 2.0;
  EXPECT_THROW(velander_surface_profiles(spec, 10, 1), Error);
  EXPECT_THROW(velander_surface_profiles(VelanderSurfaceSpec{}, 1, 1), Error);
  spec.energy_lo = 0.0;
  EXPECT_THROW(velander_surface_records(spec, 1), Error);
}

TEST(GaussianPopulation, MomentsInRange) {
  GaussianPopulationSpec spec;
  const auto m = gaussian_population_moments(spec, 4);
  ASSERT_EQ(m.size(), spec.customers);
  for (const auto& x : m) {
    EXPECT_GE(x.mean, spec.mean_lo);
    EXPECT_LE(x.mean, spec.mean_hi);
    const double cv = std::sqrt(x.variance) / x.mean;
    EXPECT_GE(cv, spec.cv_lo - 1e-12);
    EXPECT_LE(cv, spec.cv_hi + 1e-12);
    EXPECT_EQ(x.length, spec.length);
  }
}

TEST(GaussianPopulation, SeedDeterminesOutput) {
  GaussianPopulationSpec spec;
  const auto a = gaussian_population_moments(spec, 5);
  const auto b = gaussian_population_moments(spec, 5);
  const auto c = gaussian_population_moments(spec, 6);
  EXPECT_EQ(a.front().mean, b.front().mean);
  EXPECT_NE(a.front().mean, c.front().mean);
}

}  // namespace
}  // namespace velander
