#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "velander/types.hpp"

namespace velander {

enum class Coefficient { Alpha, Beta };

struct ConstraintTerm {
  Coefficient coefficient;
  std::size_t level;
  double weight;
};

// sum(weight * parameter) <= 0, or == 0 for equalities.
struct LinearConstraint {
  enum class Sense { LessEqual, Equal };
  std::vector<ConstraintTerm> terms;
  Sense sense = Sense::LessEqual;

  double evaluate(const QuantileParamSet& params) const;
  // Positive part for inequalities, absolute value for equalities.
  double violation(const QuantileParamSet& params) const;
};

// Linear conditions of a non-crossing regime, stated over adjacent level
// pairs only (ordering is transitive). C2 is instantiated at the smallest and
// largest consumption in `ec_domain`; the condition is affine in sqrt(x), so
// the two endpoints imply it everywhere in between.
std::vector<LinearConstraint> compile_constraints(const QuantileGrid& grid, Regime regime,
                                                  std::span<const double> ec_domain);

}  // namespace velander
