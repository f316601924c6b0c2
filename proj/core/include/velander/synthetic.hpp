#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "velander/evaluation.hpp"
#include "velander/types.hpp"

namespace velander {

// Customers whose peak follows a known quantile surface:
//   E ~ log-uniform[energy_lo, energy_hi],  B ~ uniform[beta_lo, beta_hi],
//   P_max = alpha * E + B * sqrt(E),
// so the tau-quantile of P_max given E is alpha * E + beta(tau) * sqrt(E)
// with beta(tau) = beta_lo + tau * (beta_hi - beta_lo).
struct VelanderSurfaceSpec {
  std::size_t customers = 5000;
  double energy_lo = 1e3;
  double energy_hi = 1e6;
  double alpha = 0.1;
  double beta_lo = 1.0;
  double beta_hi = 3.0;

  double beta_quantile(double tau) const { return beta_lo + tau * (beta_hi - beta_lo); }
};

std::vector<CustomerRecord> velander_surface_records(const VelanderSurfaceSpec& spec, std::uint64_t seed);

// Profiles realizing the records above over `length` intervals: a single
// spike at P_max at a random interval, the rest of the energy spread evenly.
// Requires P_max <= E (checked), which holds when sqrt(E) >= beta_hi / (1 - alpha).
std::vector<LoadProfile> velander_surface_profiles(const VelanderSurfaceSpec& spec, std::size_t length,
                                                   std::uint64_t seed);

// Moments for an i.i.d. Gaussian population: means log-uniform on
// [mean_lo, mean_hi] kW, coefficient of variation uniform on [cv_lo, cv_hi].
struct GaussianPopulationSpec {
  std::size_t customers = 500;
  std::size_t length = 2688;
  double interval_minutes = 15.0;
  double mean_lo = 5.0;
  double mean_hi = 500.0;
  double cv_lo = 0.2;
  double cv_hi = 0.6;
};

std::vector<ProfileMoments> gaussian_population_moments(const GaussianPopulationSpec& spec, std::uint64_t seed);

}  // namespace velander
