#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "velander/types.hpp"

namespace velander {

// A multiple quantile regression instance: fit one Velander curve per level
// of `grid` to `records`, jointly, under the non-crossing `regime`.
class FitProblem {
 public:
  // Throws Error if `records` is empty or holds a record with a
  // non-positive or non-finite consumption, or a non-finite peak.
  FitProblem(std::vector<CustomerRecord> records, QuantileGrid grid, Regime regime,
             double tolerance = 1e-7);

  const std::vector<CustomerRecord>& records() const { return records_; }
  const QuantileGrid& grid() const { return grid_; }
  Regime regime() const { return regime_; }
  // Relative optimality gap the solver must certify.
  double tolerance() const { return tolerance_; }

  // Consumptions at which C2 is instantiated; defaults to the training set.
  const std::vector<double>& ec_domain() const { return ec_domain_; }
  void set_ec_domain(std::vector<double> domain);

  // Extension point for an L2 penalty on adjacent beta differences. Only 0
  // (no regularizer) is supported by fit().
  double beta_difference_l2() const { return beta_difference_l2_; }
  void set_beta_difference_l2(double weight) { beta_difference_l2_ = weight; }

  int max_iterations() const { return max_iterations_; }
  void set_max_iterations(int n) { max_iterations_ = n; }

 private:
  std::vector<CustomerRecord> records_;
  QuantileGrid grid_;
  Regime regime_;
  double tolerance_;
  std::vector<double> ec_domain_;
  double beta_difference_l2_ = 0.0;
  int max_iterations_ = 200;
};

struct SolverDiagnostics {
  int iterations = 0;
  // Certified (upper - lower) / upper on the summed pinball loss.
  double relative_gap = 0.0;
  double primal_residual = 0.0;
  // True when the interior solution was snapped to an optimal vertex.
  bool vertex_polished = false;
};

struct FitResult {
  QuantileParamSet params;
  double achieved_apl = 0.0;  // kW
  std::size_t parameter_count = 0;
  SolverDiagnostics diagnostics;
};

// Minimizes the average pinball loss over the regime's feasible set with a
// primal-dual interior point method on the dual of the residual-split linear
// program, followed by a vertex polish. Throws SolverError when the relative
// gap cannot be brought below the problem tolerance.
FitResult fit(const FitProblem& problem);

// Grid-refinement search for a feasible parameter set with lower loss than
// `candidate`. Intended for small instances (at most 10 records, 3 levels).
struct OptimalityVerdict {
  enum class Status { Confirmed, Improvable, Inconclusive };
  Status status = Status::Inconclusive;
  double candidate_apl = 0.0;
  double best_apl = 0.0;
  // candidate_apl - best_apl, never negative.
  double gap = 0.0;
  std::size_t evaluations = 0;
  QuantileParamSet best;
};

struct OracleOptions {
  std::size_t budget = 4'000'000;  // loss evaluations
  // Also search from the all-zero parameter set (always feasible), so the
  // verdict does not hinge on the candidate's neighbourhood alone.
  bool start_from_origin = true;
  bool start_from_candidate = true;
};

OptimalityVerdict verify_optimality(const FitProblem& problem, const QuantileParamSet& candidate,
                                    const OracleOptions& options = {});

std::string_view to_string(OptimalityVerdict::Status status);

}  // namespace velander
