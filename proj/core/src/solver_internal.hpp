#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "velander/solver.hpp"

namespace velander::detail {

// Problem in scaled units: f1 = E / E_max, f2 = sqrt(f1), target = P / P_max.
struct ScaledData {
  std::size_t n = 0;
  std::vector<double> levels;
  std::vector<double> f1, f2, target;
  double energy_scale = 1.0;
  double load_scale = 1.0;
  // sqrt of the scaled extreme ECs at which C2 is imposed.
  double root_lo = 0.0;
  double root_hi = 0.0;
};

ScaledData scale_problem(const FitProblem& problem);

// Linear map theta = M z from a regime's free coordinates z to the stacked
// coefficients [alpha_0..alpha_{K-1}, beta_0..beta_{K-1}]. The regime's
// feasible set is exactly {M z : z_j >= 0 for j in nonneg()}.
class Parametrization {
 public:
  Parametrization(Regime regime, std::size_t levels, double root_lo, double root_hi);

  std::size_t dimension() const { return static_cast<std::size_t>(map_.cols()); }
  const Eigen::MatrixXd& map() const { return map_; }
  const std::vector<std::size_t>& nonneg() const { return nonneg_; }

  // Same as map() * z but accumulated level by level, so increments that are
  // exactly zero give exactly equal coefficients.
  Eigen::VectorXd expand(const Eigen::VectorXd& z) const;

 private:
  Regime regime_;
  std::size_t levels_;
  double root_lo_, root_hi_;
  Eigen::MatrixXd map_;
  std::vector<std::size_t> nonneg_;
};

struct IpmOutcome {
  Eigen::VectorXd z;
  double upper = std::numeric_limits<double>::infinity();
  double lower = -std::numeric_limits<double>::infinity();
  double primal_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Mehrotra predictor-corrector on
//   max  target^T a   s.t.  X^T a + E_J t = X^T (1 - tau),  0 <= a <= 1,  t >= 0
// whose equality multipliers are -z. Residual rows are stored level-major.
class DualInteriorPoint {
 public:
  DualInteriorPoint(const ScaledData& data, const Parametrization& param);

  IpmOutcome solve(double gap_tolerance, int max_iterations) const;
  // Snaps z to a vertex built from its p tightest conditions; returns it
  // only if it is feasible and at most `slack` worse.
  std::optional<Eigen::VectorXd> polish(const Eigen::VectorXd& z, double z_loss, double slack) const;
  // Summed pinball loss; fills residual = target - X z.
  double loss(const Eigen::VectorXd& z, std::vector<double>& residual) const;

 private:
  void apply_x(const Eigen::VectorXd& z, std::vector<double>& out) const;
  Eigen::VectorXd apply_xt(const std::vector<double>& g) const;
  Eigen::MatrixXd normal_matrix(const std::vector<double>& weight) const;
  Eigen::VectorXd row(std::size_t r) const;

  const ScaledData& data_;
  const Parametrization& param_;
  std::size_t n_, levels_, p_;
  std::vector<double> tau_;
};

}  // namespace velander::detail
