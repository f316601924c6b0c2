#include "support/oracles.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace velander::testing {

double direct_apl(std::span<const CustomerRecord> records, std::span<const double> taus,
                  std::span<const double> alphas, std::span<const double> betas) {
  long double total = 0.0L;
  for (const auto& r : records) {
    for (std::size_t k = 0; k < taus.size(); ++k) {
      const long double pred = static_cast<long double>(alphas[k]) * r.energy +
                               static_cast<long double>(betas[k]) * std::sqrt(static_cast<long double>(r.energy));
      const long double u = static_cast<long double>(r.peak) - pred;
      total += u >= 0 ? taus[k] * u : (taus[k] - 1.0L) * u;
    }
  }
  return static_cast<double>(total / (records.size() * taus.size()));
}

double interpolated_percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("no values");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p / 100.0 + 1.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo >= values.size()) return values.back();
  return values[lo - 1] + (h - static_cast<double>(lo)) * (values[lo] - values[lo - 1]);
}

namespace {

// theta = [alpha_0..alpha_{K-1}, beta_0..beta_{K-1}]
struct Halfspace {
  Eigen::VectorXd normal;
  double rhs = 0.0;
  bool equality = false;
};

std::vector<Halfspace> regime_rows(Regime regime, std::size_t K, double ec_lo, double ec_hi) {
  const auto d = static_cast<Eigen::Index>(2 * K);
  std::vector<Halfspace> rows;
  auto add = [&](std::size_t k, double a_weight, double b_weight, bool eq) {
    Halfspace h{Eigen::VectorXd::Zero(d), 0.0, eq};
    const auto i = static_cast<Eigen::Index>(k);
    const auto kk = static_cast<Eigen::Index>(K);
    h.normal(i) = a_weight;
    h.normal(i + 1) = -a_weight;
    h.normal(kk + i) = b_weight;
    h.normal(kk + i + 1) = -b_weight;
    rows.push_back(h);
  };
  for (std::size_t k = 0; k + 1 < K; ++k) {
    switch (regime) {
      case Regime::C1:
        break;
      case Regime::C2:
        // q_k(x) - q_{k+1}(x) <= 0 at the two end points of the EC range
        add(k, std::sqrt(ec_lo), 1.0, false);
        if (ec_hi != ec_lo) add(k, std::sqrt(ec_hi), 1.0, false);
        break;
      case Regime::C3:
        add(k, 1.0, 0.0, false);
        add(k, 0.0, 1.0, false);
        break;
      case Regime::C4:
        add(k, 1.0, 0.0, true);
        add(k, 0.0, 1.0, false);
        break;
    }
  }
  return rows;
}

double objective(std::span<const CustomerRecord> records, std::span<const double> taus, const Eigen::VectorXd& theta) {
  const std::size_t K = taus.size();
  long double total = 0.0L;
  for (const auto& r : records) {
    for (std::size_t k = 0; k < K; ++k) {
      const double u = r.peak - (theta(static_cast<Eigen::Index>(k)) * r.energy +
                                 theta(static_cast<Eigen::Index>(K + k)) * std::sqrt(r.energy));
      total += u >= 0 ? taus[k] * u : (taus[k] - 1.0) * u;
    }
  }
  return static_cast<double>(total / (records.size() * K));
}

}  // namespace

ExactOptimum exact_mqr_optimum(std::span<const CustomerRecord> records, std::span<const double> taus, Regime regime,
                               double ec_lo, double ec_hi) {
  const std::size_t K = taus.size();
  const std::size_t d = 2 * K;
  const auto kk = static_cast<Eigen::Index>(K);

  // C2 rows were built as sqrt(x) (a_k - a_{k+1}) + (b_k - b_{k+1}) <= 0, which is
  // (a_k - a_{k+1}) x + (b_k - b_{k+1}) sqrt(x) <= 0 divided by sqrt(x) > 0.
  if (regime == Regime::C2 && !(ec_lo > 0.0)) throw std::invalid_argument("C2 oracle needs a positive EC range");
  const auto constraints = regime_rows(regime, K, ec_lo, ec_hi);

  std::vector<Halfspace> planes;
  for (const auto& r : records) {
    for (std::size_t k = 0; k < K; ++k) {
      Halfspace h{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d)), r.peak, true};
      h.normal(static_cast<Eigen::Index>(k)) = r.energy;
      h.normal(kk + static_cast<Eigen::Index>(k)) = std::sqrt(r.energy);
      planes.push_back(h);
    }
  }
  for (const auto& c : constraints) planes.push_back(c);

  auto feasible = [&](const Eigen::VectorXd& theta) {
    const double scale = std::max(1.0, theta.cwiseAbs().maxCoeff());
    for (const auto& c : constraints) {
      const double v = c.normal.dot(theta) - c.rhs;
      if (c.equality ? std::abs(v) > 1e-9 * scale : v > 1e-9 * scale) return false;
    }
    return true;
  };

  ExactOptimum best;
  best.apl = std::numeric_limits<double>::infinity();
  const std::size_t m = planes.size();
  if (m < d) throw std::invalid_argument("too few hyperplanes for a vertex");
  std::vector<std::size_t> pick(d);
  for (std::size_t i = 0; i < d; ++i) pick[i] = i;
  Eigen::MatrixXd A(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  Eigen::VectorXd b(static_cast<Eigen::Index>(d));
  while (true) {
    for (std::size_t i = 0; i < d; ++i) {
      A.row(static_cast<Eigen::Index>(i)) = planes[pick[i]].normal.transpose();
      b(static_cast<Eigen::Index>(i)) = planes[pick[i]].rhs;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.isInvertible()) {
      const Eigen::VectorXd theta = lu.solve(b);
      ++best.vertices_tried;
      if (feasible(theta)) {
        const double f = objective(records, taus, theta);
        if (f < best.apl) {
          best.apl = f;
          best.alphas.assign(theta.data(), theta.data() + K);
          best.betas.assign(theta.data() + K, theta.data() + d);
        }
      }
    }
    // next combination in lexicographic order
    std::size_t i = d;
    while (i > 0 && pick[i - 1] == m - d + (i - 1)) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t j = i; j < d; ++j) pick[j] = pick[j - 1] + 1;
  }
  if (!std::isfinite(best.apl)) throw std::runtime_error("no feasible vertex");
  return best;
}

}  // namespace velander::testing
