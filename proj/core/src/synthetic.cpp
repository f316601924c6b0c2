#include "velander/synthetic.hpp"

#include <cmath>
#include <random>
#include <string>

#include "velander/parallel.hpp"

namespace velander {
namespace {

std::string customer_name(std::size_t i) { return "syn" + std::to_string(i); }

}  // namespace

std::vector<CustomerRecord> velander_surface_records(const VelanderSurfaceSpec& spec, std::uint64_t seed) {
  if (!(spec.energy_lo > 0.0 && spec.energy_hi >= spec.energy_lo) || !(spec.beta_hi >= spec.beta_lo)) {
    throw Error("invalid Velander surface specification");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> log_energy(std::log(spec.energy_lo), std::log(spec.energy_hi));
  std::uniform_real_distribution<double> beta(spec.beta_lo, spec.beta_hi);
  std::vector<CustomerRecord> out;
  out.reserve(spec.customers);
  for (std::size_t i = 0; i < spec.customers; ++i) {
    CustomerRecord r;
    r.customer_id = customer_name(i);
    r.energy = std::exp(log_energy(rng));
    r.peak = spec.alpha * r.energy + beta(rng) * std::sqrt(r.energy);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<LoadProfile> velander_surface_profiles(const VelanderSurfaceSpec& spec, std::size_t length,
                                                   std::uint64_t seed) {
  if (length < 2) throw Error("synthetic profiles need at least 2 intervals");
  const auto records = velander_surface_records(spec, seed);
  std::mt19937_64 rng(derive_seed(seed, 1));
  std::uniform_int_distribution<std::size_t> slot(0, length - 1);
  std::vector<LoadProfile> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (r.peak > r.energy) {
      throw Error("peak exceeds energy for " + r.customer_id + "; raise energy_lo or lower beta_hi");
    }
    LoadProfile p;
    p.customer_id = r.customer_id;
    p.values.assign(length, (r.energy - r.peak) / static_cast<double>(length - 1));
    p.values[slot(rng)] = r.peak;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<ProfileMoments> gaussian_population_moments(const GaussianPopulationSpec& spec, std::uint64_t seed) {
  if (!(spec.mean_lo > 0.0 && spec.mean_hi >= spec.mean_lo && spec.cv_lo >= 0.0 && spec.cv_hi >= spec.cv_lo)) {
    throw Error("invalid Gaussian population specification");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> log_mean(std::log(spec.mean_lo), std::log(spec.mean_hi));
  std::uniform_real_distribution<double> cv(spec.cv_lo, spec.cv_hi);
  std::vector<ProfileMoments> out;
  out.reserve(spec.customers);
  for (std::size_t i = 0; i < spec.customers; ++i) {
    ProfileMoments m;
    m.customer_id = customer_name(i);
    m.mean = std::exp(log_mean(rng));
    const double sd = cv(rng) * m.mean;
    m.variance = sd * sd;
    m.length = spec.length;
    m.interval_minutes = spec.interval_minutes;
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace velander
