#include "velander/constraints.hpp"

#include <algorithm>
#include <cmath>

namespace velander {

double LinearConstraint::evaluate(const QuantileParamSet& params) const {
  double value = 0.0;
  for (const auto& t : terms) {
    const auto& v = t.coefficient == Coefficient::Alpha ? params.alphas : params.betas;
    value += t.weight * v.at(t.level);
  }
  return value;
}

double LinearConstraint::violation(const QuantileParamSet& params) const {
  const double value = evaluate(params);
  return sense == Sense::Equal ? std::abs(value) : std::max(value, 0.0);
}

std::vector<LinearConstraint> compile_constraints(const QuantileGrid& grid, Regime regime,
                                                  std::span<const double> ec_domain) {
  using Sense = LinearConstraint::Sense;
  std::vector<LinearConstraint> out;
  const std::size_t pairs = grid.size() - 1;

  auto ordered = [&](Coefficient c, std::size_t k) {
    return LinearConstraint{{{c, k, 1.0}, {c, k + 1, -1.0}}, Sense::LessEqual};
  };

  switch (regime) {
    case Regime::C1:
      break;
    case Regime::C2: {
      if (ec_domain.empty()) throw Error("C2 constraints need at least one consumption value");
      const auto [lo, hi] = std::minmax_element(ec_domain.begin(), ec_domain.end());
      if (*lo < 0.0) throw Error("negative EC");
      std::vector<double> roots{std::sqrt(*lo)};
      if (*hi != *lo) roots.push_back(std::sqrt(*hi));
      for (std::size_t k = 0; k < pairs; ++k) {
        for (double s : roots) {
          out.push_back({{{Coefficient::Alpha, k, s},
                          {Coefficient::Alpha, k + 1, -s},
                          {Coefficient::Beta, k, 1.0},
                          {Coefficient::Beta, k + 1, -1.0}},
                         Sense::LessEqual});
        }
      }
      break;
    }
    case Regime::C3:
      for (std::size_t k = 0; k < pairs; ++k) {
        out.push_back(ordered(Coefficient::Alpha, k));
        out.push_back(ordered(Coefficient::Beta, k));
      }
      break;
    case Regime::C4:
      for (std::size_t k = 0; k < pairs; ++k) {
        out.push_back({{{Coefficient::Alpha, k, 1.0}, {Coefficient::Alpha, k + 1, -1.0}}, Sense::Equal});
      }
      for (std::size_t k = 0; k < pairs; ++k) out.push_back(ordered(Coefficient::Beta, k));
      break;
  }
  return out;
}

}  // namespace velander
