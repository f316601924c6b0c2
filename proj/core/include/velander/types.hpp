#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace velander {

// Every failure raised by the library derives from this type so callers can
// separate domain errors from programming errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by the optimizer when it cannot reach the requested optimality gap.
class SolverError : public Error {
 public:
  using Error::Error;
};

// Energies are stored in kW times the reference interval (15 minutes), loads
// in kW.
inline constexpr double kReferenceIntervalMinutes = 15.0;

// One customer's series of interval-mean power readings (kW).
struct LoadProfile {
  std::string customer_id;
  std::vector<double> values;
  double interval_minutes = kReferenceIntervalMinutes;

  std::size_t length() const { return values.size(); }
};

// Consumption/peak pair for an individual (weight_level 1) or for an
// aggregation of weight_level customers.
struct CustomerRecord {
  std::string customer_id;
  double energy = 0.0;  // kW-15min
  double peak = 0.0;    // kW
  int weight_level = 1;
};

// Non-crossing regime. Each entry is strictly stronger than the previous one.
enum class Regime { C1, C2, C3, C4 };

std::string_view to_string(Regime regime);
// Accepts "c1".."c4" in either case.
Regime parse_regime(std::string_view text);

// Strictly increasing quantile levels inside (0, 1).
class QuantileGrid {
 public:
  explicit QuantileGrid(std::vector<double> levels);

  // {0.10, 0.11, ..., 0.90}
  static QuantileGrid standard();
  // lo, lo + step, ..., hi (inclusive), each level snapped to 1e-12.
  static QuantileGrid from_range(double lo, double hi, double step);

  const std::vector<double>& levels() const { return levels_; }
  std::size_t size() const { return levels_.size(); }
  double operator[](std::size_t k) const { return levels_[k]; }

  // Index of the level equal to tau within 1e-9, if any.
  std::optional<std::size_t> find(double tau) const;
  std::size_t nearest(double tau) const;

  friend bool operator==(const QuantileGrid&, const QuantileGrid&) = default;

 private:
  std::vector<double> levels_;
};

// Fitted {(alpha_tau, beta_tau)} together with the regime it was fitted
// under and the consumption range it was trained on.
struct QuantileParamSet {
  QuantileGrid grid = QuantileGrid::standard();
  std::vector<double> alphas;
  std::vector<double> betas;
  Regime regime = Regime::C1;
  std::pair<double, double> fit_ec_range{0.0, 0.0};

  std::size_t size() const { return grid.size(); }
  double predict(std::size_t level, double energy) const;

  // Throws Error if the vectors do not match the grid.
  void check_shape() const;
};

// Largest violation (kW, or coefficient units for C3/C4) of the regime's
// structural conditions; 0 when the set satisfies them exactly. For C2 the
// prediction ordering is checked at each of `ec_points`.
double regime_violation(const QuantileParamSet& params,
                        const std::vector<double>& ec_points);

// Number of free parameters a regime has over a grid of the given size.
std::size_t parameter_count(Regime regime, std::size_t levels);

}  // namespace velander
