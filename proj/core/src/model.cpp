#include "velander/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace velander {

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::C1: return "C1";
    case Regime::C2: return "C2";
    case Regime::C3: return "C3";
    case Regime::C4: return "C4";
  }
  throw Error("unknown constraint regime");
}

Regime parse_regime(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "C1") return Regime::C1;
  if (upper == "C2") return Regime::C2;
  if (upper == "C3") return Regime::C3;
  if (upper == "C4") return Regime::C4;
  throw Error("unknown constraint regime '" + std::string(text) + "'");
}

QuantileGrid::QuantileGrid(std::vector<double> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw Error("quantile grid is empty");
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    const double tau = levels_[k];
    if (!(tau > 0.0 && tau < 1.0)) {
      throw Error("quantile level " + std::to_string(tau) + " outside (0, 1)");
    }
    if (k > 0 && !(levels_[k - 1] < tau)) {
      throw Error("quantile levels must be strictly increasing");
    }
  }
}

QuantileGrid QuantileGrid::standard() { return from_range(0.10, 0.90, 0.01); }

QuantileGrid QuantileGrid::from_range(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw Error("invalid quantile grid range");
  const auto count = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
  std::vector<double> levels;
  levels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double raw = lo + static_cast<double>(i) * step;
    levels.push_back(std::round(raw * 1e12) / 1e12);
  }
  return QuantileGrid(std::move(levels));
}

std::optional<std::size_t> QuantileGrid::find(double tau) const {
  const std::size_t k = nearest(tau);
  if (std::abs(levels_[k] - tau) <= 1e-9) return k;
  return std::nullopt;
}

std::size_t QuantileGrid::nearest(double tau) const {
  std::size_t best = 0;
  for (std::size_t k = 1; k < levels_.size(); ++k) {
    if (std::abs(levels_[k] - tau) < std::abs(levels_[best] - tau)) best = k;
  }
  return best;
}

double QuantileParamSet::predict(std::size_t level, double energy) const {
  return velander_quantile(energy, alphas[level], betas[level]);
}

void QuantileParamSet::check_shape() const {
  if (alphas.size() != grid.size() || betas.size() != grid.size()) {
    throw Error("parameter vectors do not match the quantile grid");
  }
}

double regime_violation(const QuantileParamSet& params,
                        const std::vector<double>& ec_points) {
  params.check_shape();
  const std::size_t n = params.size();
  double worst = 0.0;
  auto bump = [&worst](double v) { worst = std::max(worst, v); };
  switch (params.regime) {
    case Regime::C1:
      break;
    case Regime::C2:
      for (double x : ec_points) {
        for (std::size_t k = 0; k + 1 < n; ++k) {
          bump(params.predict(k, x) - params.predict(k + 1, x));
        }
      }
      break;
    case Regime::C3:
      for (std::size_t k = 0; k + 1 < n; ++k) {
        bump(params.alphas[k] - params.alphas[k + 1]);
        bump(params.betas[k] - params.betas[k + 1]);
      }
      break;
    case Regime::C4:
      for (std::size_t k = 0; k + 1 < n; ++k) {
        bump(std::abs(params.alphas[k] - params.alphas[k + 1]));
        bump(params.betas[k] - params.betas[k + 1]);
      }
      break;
  }
  return worst;
}

std::size_t parameter_count(Regime regime, std::size_t levels) {
  return regime == Regime::C4 ? levels + 1 : 2 * levels;
}

CustomerRecord compute_features(const LoadProfile& profile) {
  if (profile.values.empty()) throw Error("empty profile");
  double peak = profile.values.front();
  for (double v : profile.values) {
    if (!std::isfinite(v)) {
      throw Error("profile " + profile.customer_id + " contains a non-finite value");
    }
    peak = std::max(peak, v);
  }
  const double scale = profile.interval_minutes / kReferenceIntervalMinutes;
  CustomerRecord record;
  record.customer_id = profile.customer_id;
  record.peak = peak;
  record.energy = pairwise_sum(profile.values) * scale;
  record.weight_level = 1;
  return record;
}

double velander_quantile(double energy, double alpha, double beta) {
  if (energy < 0.0) throw Error("negative EC");
  return alpha * energy + beta * std::sqrt(energy);
}

double pinball_loss(double observed, double predicted, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw Error("quantile level outside (0, 1)");
  const double delta = observed - predicted;
  return delta < 0.0 ? (tau - 1.0) * delta : tau * delta;
}

double average_pinball_loss(std::span<const CustomerRecord> records,
                            const QuantileParamSet& params) {
  if (records.empty()) throw Error("average pinball loss of an empty record set");
  params.check_shape();
  const std::size_t levels = params.size();
  std::vector<double> losses;
  losses.reserve(records.size() * levels);
  for (const auto& r : records) {
    for (std::size_t k = 0; k < levels; ++k) {
      losses.push_back(pinball_loss(r.peak, params.predict(k, r.energy), params.grid[k]));
    }
  }
  return pairwise_sum(losses) / static_cast<double>(losses.size());
}

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kBlock = 32;
  if (values.size() <= kBlock) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace velander
