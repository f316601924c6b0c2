#include <algorithm>
#include <cmath>
#include <limits>

#include "velander/constraints.hpp"
#include "velander/model.hpp"
#include "velander/solver.hpp"

namespace velander {
namespace {

constexpr std::size_t kMaxRecords = 10;
constexpr std::size_t kMaxLevels = 3;

// Search coordinates: scaled (alpha_k, beta_k) per level, or (alpha, beta_k)
// when C4 ties the alphas together.
class SearchSpace {
 public:
  SearchSpace(const FitProblem& problem)
      : problem_(problem),
        levels_(problem.grid().size()),
        constraints_(compile_constraints(problem.grid(), problem.regime(), problem.ec_domain())) {
    for (const auto& r : problem.records()) {
      energy_scale_ = std::max(energy_scale_, r.energy);
      load_scale_ = std::max(load_scale_, r.peak);
    }
    if (load_scale_ == 0.0) load_scale_ = 1.0;
    for (const auto& r : problem.records()) {
      f1_.push_back(r.energy / energy_scale_);
      f2_.push_back(std::sqrt(r.energy / energy_scale_));
      y_.push_back(r.peak / load_scale_);
    }
  }

  std::size_t dimension() const {
    return problem_.regime() == Regime::C4 ? levels_ + 1 : 2 * levels_;
  }

  QuantileParamSet to_params(const std::vector<double>& u) const {
    QuantileParamSet p;
    p.grid = problem_.grid();
    p.regime = problem_.regime();
    p.alphas.resize(levels_);
    p.betas.resize(levels_);
    const double as = load_scale_ / energy_scale_;
    const double bs = load_scale_ / std::sqrt(energy_scale_);
    for (std::size_t k = 0; k < levels_; ++k) {
      if (problem_.regime() == Regime::C4) {
        p.alphas[k] = u[0] * as;
        p.betas[k] = u[1 + k] * bs;
      } else {
        p.alphas[k] = u[2 * k] * as;
        p.betas[k] = u[2 * k + 1] * bs;
      }
    }
    return p;
  }

  std::vector<double> from_params(const QuantileParamSet& p) const {
    const double as = load_scale_ / energy_scale_;
    const double bs = load_scale_ / std::sqrt(energy_scale_);
    std::vector<double> u(dimension());
    for (std::size_t k = 0; k < levels_; ++k) {
      if (problem_.regime() == Regime::C4) {
        u[0] = p.alphas[0] / as;
        u[1 + k] = p.betas[k] / bs;
      } else {
        u[2 * k] = p.alphas[k] / as;
        u[2 * k + 1] = p.betas[k] / bs;
      }
    }
    return u;
  }

  bool feasible(const QuantileParamSet& p) const {
    const double scale = 1.0 + std::max(max_abs(p.alphas) * energy_scale_, max_abs(p.betas) * std::sqrt(energy_scale_));
    for (const auto& c : constraints_) {
      if (c.violation(p) > 1e-12 * scale) return false;
    }
    return true;
  }

  // Scaled APL, or +inf outside the feasible set.
  double value(const std::vector<double>& u) {
    ++evaluations;
    const auto p = to_params(u);
    if (!feasible(p)) return std::numeric_limits<double>::infinity();
    return scaled_apl(u);
  }

  double scaled_apl(const std::vector<double>& u) const {
    double total = 0.0;
    for (std::size_t k = 0; k < levels_; ++k) {
      const double a = problem_.regime() == Regime::C4 ? u[0] : u[2 * k];
      const double b = problem_.regime() == Regime::C4 ? u[1 + k] : u[2 * k + 1];
      const double tau = problem_.grid()[k];
      for (std::size_t i = 0; i < y_.size(); ++i) {
        const double d = y_[i] - a * f1_[i] - b * f2_[i];
        total += d < 0.0 ? (tau - 1.0) * d : tau * d;
      }
    }
    return total / static_cast<double>(levels_ * y_.size());
  }

  // Bound on the APL change per unit move of every coordinate.
  double lipschitz() const {
    double s = 0.0;
    for (std::size_t i = 0; i < y_.size(); ++i) s += f1_[i] + f2_[i];
    return s / static_cast<double>(y_.size());
  }

  double load_scale() const { return load_scale_; }

  // Losses below this are summation noise around an interpolating fit.
  double noise_floor() const {
    double s = 0.0;
    for (double y : y_) s += std::abs(y);
    return 1e-12 * s / static_cast<double>(y_.size());
  }

  std::size_t evaluations = 0;

 private:
  static double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }

  const FitProblem& problem_;
  std::size_t levels_;
  std::vector<LinearConstraint> constraints_;
  double energy_scale_ = 0.0;
  double load_scale_ = 0.0;
  std::vector<double> f1_, f2_, y_;
};

struct SearchOutcome {
  std::vector<double> best;
  double value = std::numeric_limits<double>::infinity();
  bool resolved = false;  // mesh reached the target resolution
};

// Full-stencil mesh search: polls every point of {-1, 0, 1}^d around the
// incumbent, moves to the best improvement and doubles the mesh, or halves
// it when nothing improves.
SearchOutcome mesh_search(SearchSpace& space, std::vector<double> start, double target_resolution,
                          std::size_t budget) {
  const std::size_t d = start.size();
  SearchOutcome out;
  out.best = start;
  out.value = space.value(start);
  if (!std::isfinite(out.value)) return out;
  double scale = 1.0;
  for (double x : start) scale = std::max(scale, std::abs(x));
  double h = 0.25 * scale;
  const double h_max = 1e6 * scale;

  std::size_t stencil = 1;
  for (std::size_t i = 0; i < d; ++i) stencil *= 3;
  std::vector<double> trial(d);

  while (h >= target_resolution) {
    if (space.evaluations + stencil > budget) return out;
    std::vector<double> step_best = out.best;
    double step_value = out.value;
    for (std::size_t code = 0; code < stencil; ++code) {
      std::size_t c = code;
      bool centre = true;
      for (std::size_t i = 0; i < d; ++i) {
        const int offset = static_cast<int>(c % 3) - 1;
        c /= 3;
        if (offset != 0) centre = false;
        trial[i] = out.best[i] + offset * h;
      }
      if (centre) continue;
      const double v = space.value(trial);
      if (v < step_value) {
        step_value = v;
        step_best = trial;
      }
    }
    if (step_value < out.value) {
      out.best = std::move(step_best);
      out.value = step_value;
      h = std::min(2.0 * h, h_max);
    } else {
      h *= 0.5;
    }
  }
  out.resolved = true;
  return out;
}

}  // namespace

std::string_view to_string(OptimalityVerdict::Status status) {
  switch (status) {
    case OptimalityVerdict::Status::Confirmed: return "confirmed";
    case OptimalityVerdict::Status::Improvable: return "improvable";
    case OptimalityVerdict::Status::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

OptimalityVerdict verify_optimality(const FitProblem& problem, const QuantileParamSet& candidate,
                                    const OracleOptions& options) {
  if (problem.records().size() > kMaxRecords || problem.grid().size() > kMaxLevels) {
    throw Error("optimality oracle is limited to 10 records and 3 quantile levels");
  }
  candidate.check_shape();
  if (!(candidate.grid == problem.grid()) || candidate.regime != problem.regime()) {
    throw Error("candidate was not fitted on the problem's grid and regime");
  }
  SearchSpace space(problem);
  if (!space.feasible(candidate)) throw Error("candidate violates the regime constraints");

  OptimalityVerdict verdict;
  const auto start = space.from_params(candidate);
  const double cand_scaled = space.scaled_apl(start);
  verdict.candidate_apl = average_pinball_loss(problem.records(), candidate);
  verdict.best = candidate;
  verdict.best_apl = verdict.candidate_apl;

  const double threshold = std::max(problem.tolerance() * cand_scaled, space.noise_floor());
  const double resolution = std::max(threshold, 1e-15) / space.lipschitz();

  bool all_resolved = true;
  double best_scaled = cand_scaled;
  auto consider = [&](std::vector<double> from) {
    if (cand_scaled <= space.noise_floor()) return;  // nothing beats a zero loss
    const auto out = mesh_search(space, std::move(from), resolution, options.budget);
    all_resolved = all_resolved && out.resolved;
    if (out.value < best_scaled) {
      best_scaled = out.value;
      verdict.best = space.to_params(out.best);
    }
  };
  if (options.start_from_candidate) consider(start);
  if (options.start_from_origin) consider(std::vector<double>(space.dimension(), 0.0));

  verdict.evaluations = space.evaluations;
  verdict.best_apl = best_scaled < cand_scaled ? average_pinball_loss(problem.records(), verdict.best)
                                               : verdict.candidate_apl;
  verdict.gap = std::max(verdict.candidate_apl - verdict.best_apl, 0.0);
  if (cand_scaled - best_scaled > threshold) {
    verdict.status = OptimalityVerdict::Status::Improvable;
  } else if (all_resolved) {
    verdict.status = OptimalityVerdict::Status::Confirmed;
  } else {
    verdict.status = OptimalityVerdict::Status::Inconclusive;
  }
  return verdict;
}

}  // namespace velander
