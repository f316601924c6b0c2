#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "velander/solver.hpp"

namespace velander {
namespace {

std::vector<CustomerRecord> small_instance(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> log_e(std::log(50.0), std::log(5e3));
  std::uniform_real_distribution<double> b(1.0, 3.0);
  std::vector<CustomerRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = std::exp(log_e(rng));
    out.push_back({"c" + std::to_string(i), e, 0.1 * e + b(rng) * std::sqrt(e), 1});
  }
  return out;
}

TEST(VerifyOptimality, ConfirmsSolverOptimum) {
  const QuantileGrid grid({0.2, 0.5, 0.8});
  for (Regime regime : {Regime::C1, Regime::C2, Regime::C3, Regime::C4}) {
    const FitProblem problem(small_instance(3, 6), grid, regime);
    const auto result = fit(problem);
    const auto verdict = verify_optimality(problem, result.params);
    EXPECT_EQ(verdict.status, OptimalityVerdict::Status::Confirmed) << to_string(regime);
    EXPECT_LE(verdict.gap, 1e-7 * result.achieved_apl);
    EXPECT_NEAR(verdict.candidate_apl, result.achieved_apl, 1e-12 * result.achieved_apl);
  }
}

TEST(VerifyOptimality, FlagsPerturbedCandidate) {
  const QuantileGrid grid({0.3, 0.7});
  const FitProblem problem(small_instance(4, 5), grid, Regime::C3);
  auto params = fit(problem).params;
  for (double& b : params.betas) b += 0.5;  // uniform shift keeps C3 feasible
  const auto verdict = verify_optimality(problem, params);
  EXPECT_EQ(verdict.status, OptimalityVerdict::Status::Improvable);
  EXPECT_GT(verdict.gap, 0.0);
  EXPECT_LT(verdict.best_apl, verdict.candidate_apl);
}

TEST(VerifyOptimality, ZeroLossIsConfirmedWithoutSearch) {
  const FitProblem problem({{"a", 1.0, 2.0, 1}, {"b", 4.0, 6.0, 1}}, QuantileGrid({0.5}), Regime::C1);
  QuantileParamSet p;
  p.grid = problem.grid();
  p.alphas = {1.0};
  p.betas = {1.0};
  const auto verdict = verify_optimality(problem, p);
  EXPECT_EQ(verdict.status, OptimalityVerdict::Status::Confirmed);
  EXPECT_EQ(verdict.evaluations, 0u);
}

TEST(VerifyOptimality, InterpolatingFitWithRoundingNoiseIsConfirmed) {
  const FitProblem problem({{"a", 128.2895002749639, 31.268906719689372, 1}, {"b", 57.815287496173944, 16.2536012161553, 1}},
                           QuantileGrid({0.47}), Regime::C1);
  const auto result = fit(problem);
  ASSERT_LT(result.achieved_apl, 1e-13);
  const auto verdict = verify_optimality(problem, result.params);
  EXPECT_EQ(verdict.status, OptimalityVerdict::Status::Confirmed);
  EXPECT_EQ(verdict.evaluations, 0u);
}

TEST(VerifyOptimality, TinyBudgetIsInconclusive) {
  const FitProblem problem(small_instance(5, 6), QuantileGrid({0.2, 0.5, 0.8}), Regime::C1);
  const auto result = fit(problem);
  OracleOptions options;
  options.budget = 100;
  EXPECT_EQ(verify_optimality(problem, result.params, options).status, OptimalityVerdict::Status::Inconclusive);
}

TEST(VerifyOptimality, RejectsOversizedOrMismatchedInput) {
  const auto big = small_instance(6, 11);
  const FitProblem too_many(big, QuantileGrid({0.5}), Regime::C1);
  QuantileParamSet p;
  p.grid = QuantileGrid({0.5});
  p.alphas = {0.1};
  p.betas = {1.0};
  EXPECT_THROW(verify_optimality(too_many, p), Error);

  const FitProblem too_wide(small_instance(6, 4), QuantileGrid({0.2, 0.4, 0.6, 0.8}), Regime::C1);
  EXPECT_THROW(verify_optimality(too_wide, p), Error);

  const FitProblem c3(small_instance(6, 4), QuantileGrid({0.5}), Regime::C3);
  EXPECT_THROW(verify_optimality(c3, p), Error);  // candidate regime differs
}

TEST(VerifyOptimality, RejectsInfeasibleCandidate) {
  const FitProblem problem(small_instance(7, 4), QuantileGrid({0.3, 0.7}), Regime::C4);
  QuantileParamSet p;
  p.grid = problem.grid();
  p.regime = Regime::C4;
  p.alphas = {0.1, 0.2};
  p.betas = {1.0, 2.0};
  EXPECT_THROW(verify_optimality(problem, p), Error);
}

}  // namespace
}  // namespace velander
