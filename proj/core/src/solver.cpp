#include "velander/solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "solver_internal.hpp"
#include "velander/model.hpp"

namespace velander {

FitProblem::FitProblem(std::vector<CustomerRecord> records, QuantileGrid grid, Regime regime,
                       double tolerance)
    : records_(std::move(records)), grid_(std::move(grid)), regime_(regime), tolerance_(tolerance) {
  if (records_.empty()) throw Error("fit problem has no records");
  if (!(tolerance_ > 0.0 && tolerance_ < 1.0)) throw Error("solver tolerance must lie in (0, 1)");
  ec_domain_.reserve(records_.size());
  for (const auto& r : records_) {
    if (!(r.energy > 0.0) || !std::isfinite(r.energy)) {
      throw Error("record " + r.customer_id + " has non-positive or non-finite EC");
    }
    if (!(r.peak >= 0.0) || !std::isfinite(r.peak)) {
      throw Error("record " + r.customer_id + " has a negative or non-finite peak");
    }
    ec_domain_.push_back(r.energy);
  }
}

void FitProblem::set_ec_domain(std::vector<double> domain) {
  if (domain.empty()) throw Error("EC domain is empty");
  for (double x : domain) {
    if (!(x > 0.0) || !std::isfinite(x)) throw Error("EC domain values must be positive and finite");
  }
  ec_domain_ = std::move(domain);
}

namespace detail {

ScaledData scale_problem(const FitProblem& problem) {
  const auto& records = problem.records();
  ScaledData d;
  d.n = records.size();
  d.levels = problem.grid().levels();
  double emax = 0.0, pmax = 0.0;
  for (const auto& r : records) {
    emax = std::max(emax, r.energy);
    pmax = std::max(pmax, r.peak);
  }
  d.energy_scale = emax;
  d.load_scale = pmax > 0.0 ? pmax : 1.0;
  d.f1.resize(d.n);
  d.f2.resize(d.n);
  d.target.resize(d.n);
  for (std::size_t i = 0; i < d.n; ++i) {
    d.f1[i] = records[i].energy / d.energy_scale;
    d.f2[i] = std::sqrt(d.f1[i]);
    d.target[i] = records[i].peak / d.load_scale;
  }
  const auto [lo, hi] = std::minmax_element(problem.ec_domain().begin(), problem.ec_domain().end());
  d.root_lo = std::sqrt(*lo / d.energy_scale);
  d.root_hi = std::sqrt(*hi / d.energy_scale);
  return d;
}

Parametrization::Parametrization(Regime regime, std::size_t levels, double root_lo, double root_hi)
    : regime_(regime), levels_(levels), root_lo_(root_lo), root_hi_(root_hi) {
  const std::size_t K = levels;
  const std::size_t p = parameter_count(regime, K);
  map_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * K), static_cast<Eigen::Index>(p));
  // Columns of the identity in turn give the corresponding columns of the map.
  Eigen::VectorXd unit = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j) {
    unit.setZero();
    unit[static_cast<Eigen::Index>(j)] = 1.0;
    map_.col(static_cast<Eigen::Index>(j)) = expand(unit);
  }
  switch (regime) {
    case Regime::C1:
      break;
    case Regime::C2:
      for (std::size_t k = 0; k + 1 < K; ++k) {
        if (root_hi_ > root_lo_) nonneg_.push_back(2 + 2 * k);
        nonneg_.push_back(3 + 2 * k);
      }
      break;
    case Regime::C3:
      for (std::size_t k = 1; k < K; ++k) nonneg_.push_back(k);
      for (std::size_t k = 1; k < K; ++k) nonneg_.push_back(K + k);
      break;
    case Regime::C4:
      for (std::size_t k = 1; k < K; ++k) nonneg_.push_back(1 + k);
      break;
  }
}

// z layouts:
//   C1  [alpha_0..alpha_{K-1}, beta_0..beta_{K-1}]
//   C2  [alpha_0, beta_0, (u_k, w_k) for each adjacent pair]; with two
//       distinct roots s_lo < s_hi, u_k and w_k are the prediction increments
//       over sqrt(E) at s_lo and s_hi. With a single root s, u_k is the free
//       alpha increment and w_k the increment at s.
//   C3  [alpha_0, d_alpha..., beta_0, d_beta...]
//   C4  [alpha, beta_0, d_beta...]
Eigen::VectorXd Parametrization::expand(const Eigen::VectorXd& z) const {
  const std::size_t K = levels_;
  Eigen::VectorXd theta(static_cast<Eigen::Index>(2 * K));
  auto a = [&](std::size_t k) -> double& { return theta[static_cast<Eigen::Index>(k)]; };
  auto b = [&](std::size_t k) -> double& { return theta[static_cast<Eigen::Index>(K + k)]; };
  auto zz = [&](std::size_t j) { return z[static_cast<Eigen::Index>(j)]; };
  switch (regime_) {
    case Regime::C1:
      theta = z;
      break;
    case Regime::C2: {
      a(0) = zz(0);
      b(0) = zz(1);
      const bool two = root_hi_ > root_lo_;
      const double span = root_hi_ - root_lo_;
      for (std::size_t k = 1; k < K; ++k) {
        const double u = zz(2 * k), w = zz(2 * k + 1);
        double da = 0.0, db = 0.0;
        if (two) {
          da = (w - u) / span;
          db = (root_hi_ * u - root_lo_ * w) / span;
        } else {
          da = u;
          db = w - root_lo_ * u;
        }
        a(k) = a(k - 1) + da;
        b(k) = b(k - 1) + db;
      }
      break;
    }
    case Regime::C3:
      a(0) = zz(0);
      b(0) = zz(K);
      for (std::size_t k = 1; k < K; ++k) {
        a(k) = a(k - 1) + zz(k);
        b(k) = b(k - 1) + zz(K + k);
      }
      break;
    case Regime::C4:
      b(0) = zz(1);
      for (std::size_t k = 0; k < K; ++k) a(k) = zz(0);
      for (std::size_t k = 1; k < K; ++k) b(k) = b(k - 1) + zz(1 + k);
      break;
  }
  return theta;
}

DualInteriorPoint::DualInteriorPoint(const ScaledData& data, const Parametrization& param)
    : data_(data), param_(param), n_(data.n), levels_(data.levels.size()), p_(param.dimension()) {
  tau_.resize(n_ * levels_);
  for (std::size_t k = 0; k < levels_; ++k) {
    std::fill_n(tau_.begin() + static_cast<std::ptrdiff_t>(k * n_), n_, data.levels[k]);
  }
}

void DualInteriorPoint::apply_x(const Eigen::VectorXd& z, std::vector<double>& out) const {
  const Eigen::VectorXd theta = param_.map() * z;
  out.resize(n_ * levels_);
  for (std::size_t k = 0; k < levels_; ++k) {
    const double a = theta[static_cast<Eigen::Index>(k)];
    const double b = theta[static_cast<Eigen::Index>(levels_ + k)];
    double* row = out.data() + k * n_;
    for (std::size_t i = 0; i < n_; ++i) row[i] = a * data_.f1[i] + b * data_.f2[i];
  }
}

Eigen::VectorXd DualInteriorPoint::apply_xt(const std::vector<double>& g) const {
  Eigen::VectorXd h(static_cast<Eigen::Index>(2 * levels_));
  for (std::size_t k = 0; k < levels_; ++k) {
    const double* row = g.data() + k * n_;
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      s1 += row[i] * data_.f1[i];
      s2 += row[i] * data_.f2[i];
    }
    h[static_cast<Eigen::Index>(k)] = s1;
    h[static_cast<Eigen::Index>(levels_ + k)] = s2;
  }
  return param_.map().transpose() * h;
}

Eigen::MatrixXd DualInteriorPoint::normal_matrix(const std::vector<double>& weight) const {
  const auto K = static_cast<Eigen::Index>(levels_);
  const auto& M = param_.map();
  Eigen::MatrixXd hm(2 * K, M.cols());
  for (Eigen::Index k = 0; k < K; ++k) {
    const double* w = weight.data() + static_cast<std::size_t>(k) * n_;
    double h11 = 0.0, h12 = 0.0, h22 = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double f1 = data_.f1[i], f2 = data_.f2[i];
      h11 += w[i] * f1 * f1;
      h12 += w[i] * f1 * f2;
      h22 += w[i] * f2 * f2;
    }
    hm.row(k) = h11 * M.row(k) + h12 * M.row(K + k);
    hm.row(K + k) = h12 * M.row(k) + h22 * M.row(K + k);
  }
  return M.transpose() * hm;
}

double DualInteriorPoint::loss(const Eigen::VectorXd& z, std::vector<double>& residual) const {
  apply_x(z, residual);
  double total = 0.0;
  for (std::size_t k = 0; k < levels_; ++k) {
    const double tau = data_.levels[k];
    double* row = residual.data() + k * n_;
    for (std::size_t i = 0; i < n_; ++i) {
      row[i] = data_.target[i] - row[i];
      total += row[i] < 0.0 ? (tau - 1.0) * row[i] : tau * row[i];
    }
  }
  return total;
}

Eigen::VectorXd DualInteriorPoint::row(std::size_t r) const {
  const auto k = static_cast<Eigen::Index>(r / n_);
  const std::size_t i = r % n_;
  const auto K = static_cast<Eigen::Index>(levels_);
  return (data_.f1[i] * param_.map().row(k) + data_.f2[i] * param_.map().row(K + k)).transpose();
}

namespace {

// Cholesky with a growing diagonal shift for the (numerically) semidefinite
// case that arises when a level's design is rank deficient.
Eigen::LLT<Eigen::MatrixXd> factor(Eigen::MatrixXd m) {
  const double scale = std::max(m.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  double shift = 0.0;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) return llt;
    const double next = shift == 0.0 ? 1e-14 * scale : shift * 10.0;
    m.diagonal().array() += next - shift;
    shift = next;
  }
  throw SolverError("normal equations are not positive definite");
}

double max_step(const std::vector<double>& x, const std::vector<double>& dx, double limit) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (dx[i] < 0.0) limit = std::min(limit, -x[i] / dx[i]);
  }
  return limit;
}

double max_step_upper(const std::vector<double>& gap, const std::vector<double>& dx, double limit) {
  for (std::size_t i = 0; i < gap.size(); ++i) {
    if (dx[i] > 0.0) limit = std::min(limit, gap[i] / dx[i]);
  }
  return limit;
}

}  // namespace

IpmOutcome DualInteriorPoint::solve(double gap_tolerance, int max_iterations) const {
  const std::size_t N = n_ * levels_;
  const auto& nonneg = param_.nonneg();
  const std::size_t m = nonneg.size();
  const auto P = static_cast<Eigen::Index>(p_);

  // Dual box variables a in [0, 1]^N (one per residual), slack t >= 0 per
  // nonnegative coordinate of z; equality rows X^T a + E_J t = X^T (1 - tau).
  std::vector<double> xa(N), ga(N), sa(N), va(N);
  std::vector<double> xt(m, 1.0), st(m);
  for (std::size_t r = 0; r < N; ++r) {
    xa[r] = 1.0 - tau_[r];
    ga[r] = tau_[r];
  }
  const Eigen::VectorXd b = apply_xt(xa);
  double offset = 0.0;  // sum (1 - tau) * target
  for (std::size_t r = 0; r < N; ++r) offset += (1.0 - tau_[r]) * data_.target[r % n_];

  // Least-squares start for the regression coefficients.
  std::vector<double> work(N, 1.0);
  Eigen::MatrixXd gram = normal_matrix(work);
  std::vector<double> targets(N);
  for (std::size_t r = 0; r < N; ++r) targets[r] = data_.target[r % n_];
  Eigen::VectorXd z0 = factor(gram).solve(apply_xt(targets));
  for (std::size_t j : nonneg) z0[static_cast<Eigen::Index>(j)] = std::max(z0[static_cast<Eigen::Index>(j)], 0.0);
  std::vector<double> residual;
  loss(z0, residual);
  double mean_abs = 0.0;
  for (double v : residual) mean_abs += std::abs(v);
  mean_abs /= static_cast<double>(N);
  const double shift = std::max(0.1 * mean_abs, 1e-4);
  for (std::size_t r = 0; r < N; ++r) {
    sa[r] = std::max(-residual[r], 0.0) + shift;
    va[r] = std::max(residual[r], 0.0) + shift;
  }
  Eigen::VectorXd y = -z0;
  for (std::size_t j = 0; j < m; ++j) st[j] = std::max(z0[static_cast<Eigen::Index>(nonneg[j])], 0.0) + shift;

  const double loss_floor = 1e-12 * static_cast<double>(N);
  const double b_norm = 1.0 + b.cwiseAbs().maxCoeff();

  IpmOutcome out;
  out.z = z0;
  out.upper = loss(z0, residual);
  out.lower = -std::numeric_limits<double>::infinity();

  std::vector<double> xy, rd_a(N), theta_a(N), rxs_a(N), rgv_a(N), q_a(N), tmp(N);
  std::vector<double> dxa(N), dsa(N), dva(N), dxa_aff(N), dsa_aff(N), dva_aff(N);
  Eigen::VectorXd rd_t(static_cast<Eigen::Index>(m)), theta_t(static_cast<Eigen::Index>(m));

  for (int iter = 0; iter <= max_iterations; ++iter) {
    out.iterations = iter;
    // Residuals of the current iterate.
    Eigen::VectorXd rp = b - apply_xt(xa);
    for (std::size_t j = 0; j < m; ++j) rp[static_cast<Eigen::Index>(nonneg[j])] -= xt[j];
    apply_x(y, xy);
    for (std::size_t r = 0; r < N; ++r) rd_a[r] = -data_.target[r % n_] - xy[r] - sa[r] + va[r];
    for (std::size_t j = 0; j < m; ++j) rd_t[static_cast<Eigen::Index>(j)] = -y[static_cast<Eigen::Index>(nonneg[j])] - st[j];

    // Certificate: z = -y (clipped onto its cone) bounds the optimum from
    // above; the dual box point bounds it from below once rp vanishes.
    Eigen::VectorXd z = -y;
    for (std::size_t j : nonneg) z[static_cast<Eigen::Index>(j)] = std::max(z[static_cast<Eigen::Index>(j)], 0.0);
    const double upper = loss(z, residual);
    double lower = -offset;
    for (std::size_t r = 0; r < N; ++r) lower += data_.target[r % n_] * xa[r];
    const double primal_res = rp.cwiseAbs().maxCoeff() / b_norm;
    if (upper < out.upper || !std::isfinite(out.upper)) {
      out.upper = upper;
      out.z = z;
    }
    out.primal_residual = primal_res;
    if (primal_res <= 1e-9) out.lower = std::max(out.lower, lower);
    const double gap = out.upper - out.lower;
    if (primal_res <= 1e-9 && gap <= gap_tolerance * std::max(out.upper, loss_floor)) {
      out.converged = true;
      break;
    }
    if (iter == max_iterations) break;

    // Newton system reduced to the normal equations A Theta A^T dy = rhs.
    for (std::size_t r = 0; r < N; ++r) theta_a[r] = 1.0 / (sa[r] / xa[r] + va[r] / ga[r]);
    for (std::size_t j = 0; j < m; ++j) theta_t[static_cast<Eigen::Index>(j)] = xt[j] / st[j];
    Eigen::MatrixXd normal = normal_matrix(theta_a);
    for (std::size_t j = 0; j < m; ++j) {
      const auto jj = static_cast<Eigen::Index>(nonneg[j]);
      normal(jj, jj) += theta_t[static_cast<Eigen::Index>(j)];
    }
    const auto chol = factor(std::move(normal));

    Eigen::VectorXd rxs_t(static_cast<Eigen::Index>(m));
    Eigen::VectorXd dy(P), dxt(static_cast<Eigen::Index>(m)), dst(static_cast<Eigen::Index>(m));
    std::vector<double> xdy;

    auto newton = [&]() {
      for (std::size_t r = 0; r < N; ++r) {
        q_a[r] = rd_a[r] - rxs_a[r] / xa[r] + rgv_a[r] / ga[r];
        tmp[r] = theta_a[r] * q_a[r];
      }
      Eigen::VectorXd rhs = rp + apply_xt(tmp);
      Eigen::VectorXd q_t(static_cast<Eigen::Index>(m));
      for (std::size_t j = 0; j < m; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        q_t[jj] = rd_t[jj] - rxs_t[jj] / xt[j];
        rhs[static_cast<Eigen::Index>(nonneg[j])] += theta_t[jj] * q_t[jj];
      }
      dy = chol.solve(rhs);
      apply_x(dy, xdy);
      for (std::size_t r = 0; r < N; ++r) {
        dxa[r] = theta_a[r] * (xdy[r] - q_a[r]);
        dsa[r] = (rxs_a[r] - sa[r] * dxa[r]) / xa[r];
        dva[r] = (rgv_a[r] + va[r] * dxa[r]) / ga[r];
      }
      for (std::size_t j = 0; j < m; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        dxt[jj] = theta_t[jj] * (dy[static_cast<Eigen::Index>(nonneg[j])] - q_t[jj]);
        dst[jj] = (rxs_t[jj] - st[j] * dxt[jj]) / xt[j];
      }
    };

    auto steps = [&](double& alpha_p, double& alpha_d) {
      alpha_p = max_step(xa, dxa, 1.0);
      alpha_p = max_step_upper(ga, dxa, alpha_p);
      alpha_d = max_step(sa, dsa, 1.0);
      alpha_d = max_step(va, dva, alpha_d);
      for (std::size_t j = 0; j < m; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        if (dxt[jj] < 0.0) alpha_p = std::min(alpha_p, -xt[j] / dxt[jj]);
        if (dst[jj] < 0.0) alpha_d = std::min(alpha_d, -st[j] / dst[jj]);
      }
    };

    double comp = 0.0;
    for (std::size_t r = 0; r < N; ++r) comp += xa[r] * sa[r] + ga[r] * va[r];
    for (std::size_t j = 0; j < m; ++j) comp += xt[j] * st[j];
    const double pairs = static_cast<double>(2 * N + m);
    const double mu = comp / pairs;

    // Predictor.
    for (std::size_t r = 0; r < N; ++r) {
      rxs_a[r] = -xa[r] * sa[r];
      rgv_a[r] = -ga[r] * va[r];
    }
    for (std::size_t j = 0; j < m; ++j) rxs_t[static_cast<Eigen::Index>(j)] = -xt[j] * st[j];
    newton();
    double ap = 0.0, ad = 0.0;
    steps(ap, ad);
    double comp_aff = 0.0;
    for (std::size_t r = 0; r < N; ++r) {
      comp_aff += (xa[r] + ap * dxa[r]) * (sa[r] + ad * dsa[r]) + (ga[r] - ap * dxa[r]) * (va[r] + ad * dva[r]);
    }
    for (std::size_t j = 0; j < m; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      comp_aff += (xt[j] + ap * dxt[jj]) * (st[j] + ad * dst[jj]);
    }
    const double sigma = std::pow(std::max(comp_aff, 0.0) / comp, 3.0);
    const double target_mu = sigma * mu;

    // Corrector with the second-order terms of the affine direction.
    dxa_aff = dxa;
    dsa_aff = dsa;
    dva_aff = dva;
    const Eigen::VectorXd dxt_aff = dxt, dst_aff = dst;
    for (std::size_t r = 0; r < N; ++r) {
      rxs_a[r] = target_mu - xa[r] * sa[r] - dxa_aff[r] * dsa_aff[r];
      rgv_a[r] = target_mu - ga[r] * va[r] + dxa_aff[r] * dva_aff[r];
    }
    for (std::size_t j = 0; j < m; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      rxs_t[jj] = target_mu - xt[j] * st[j] - dxt_aff[jj] * dst_aff[jj];
    }
    newton();
    steps(ap, ad);
    constexpr double kDamping = 0.99995;
    ap = std::min(1.0, kDamping * ap);
    ad = std::min(1.0, kDamping * ad);

    for (std::size_t r = 0; r < N; ++r) {
      xa[r] += ap * dxa[r];
      ga[r] -= ap * dxa[r];
      sa[r] += ad * dsa[r];
      va[r] += ad * dva[r];
    }
    for (std::size_t j = 0; j < m; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      xt[j] += ap * dxt[jj];
      st[j] += ad * dst[jj];
    }
    y += ad * dy;
  }
  return out;
}

std::optional<Eigen::VectorXd> DualInteriorPoint::polish(const Eigen::VectorXd& z, double z_loss,
                                                         double slack) const {
  const std::size_t N = n_ * levels_;
  const auto& nonneg = param_.nonneg();
  std::vector<double> residual;
  loss(z, residual);

  // Candidate active conditions: interpolated residuals and bound rows,
  // ordered by slack.
  struct Candidate {
    double slack;
    std::size_t index;  // < N: residual row, otherwise nonneg[index - N]
  };
  std::vector<Candidate> cands;
  cands.reserve(N + nonneg.size());
  for (std::size_t r = 0; r < N; ++r) cands.push_back({std::abs(residual[r]), r});
  for (std::size_t j = 0; j < nonneg.size(); ++j) {
    cands.push_back({std::abs(z[static_cast<Eigen::Index>(nonneg[j])]), N + j});
  }
  const std::size_t keep = std::min(cands.size(), 20 * p_ + 50);
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                    [](const Candidate& a, const Candidate& b) {
                      return a.slack < b.slack || (a.slack == b.slack && a.index < b.index);
                    });

  const auto P = static_cast<Eigen::Index>(p_);
  Eigen::MatrixXd basis(P, P);
  Eigen::MatrixXd system(P, P);
  Eigen::VectorXd rhs(P);
  Eigen::Index rank = 0;
  for (std::size_t c = 0; c < keep && rank < P; ++c) {
    Eigen::VectorXd v;
    double value = 0.0;
    if (cands[c].index < N) {
      v = row(cands[c].index);
      value = data_.target[cands[c].index % n_];
    } else {
      v = Eigen::VectorXd::Zero(P);
      v[static_cast<Eigen::Index>(nonneg[cands[c].index - N])] = 1.0;
    }
    const double norm = v.norm();
    if (norm == 0.0) continue;
    Eigen::VectorXd w = v;
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index q = 0; q < rank; ++q) w -= basis.col(q).dot(w) * basis.col(q);
    }
    const double wn = w.norm();
    if (wn <= 1e-9 * norm) continue;
    basis.col(rank) = w / wn;
    system.row(rank) = v.transpose();
    rhs[rank] = value;
    ++rank;
  }
  if (rank < P) return std::nullopt;

  const Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (lu.rank() < P) return std::nullopt;
  Eigen::VectorXd vertex = lu.solve(rhs);
  for (std::size_t j : nonneg) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (vertex[jj] < -1e-12 * (1.0 + vertex.cwiseAbs().maxCoeff())) return std::nullopt;
    vertex[jj] = std::max(vertex[jj], 0.0);
  }
  if (!vertex.allFinite()) return std::nullopt;
  const double vertex_loss = loss(vertex, residual);
  if (vertex_loss <= z_loss + slack) return vertex;
  return std::nullopt;
}

}  // namespace detail

FitResult fit(const FitProblem& problem) {
  if (problem.beta_difference_l2() != 0.0) {
    throw Error("the L2 penalty on beta differences is not supported by the linear solver");
  }
  const auto data = detail::scale_problem(problem);
  const std::size_t K = problem.grid().size();
  const detail::Parametrization param(problem.regime(), K, data.root_lo, data.root_hi);
  const detail::DualInteriorPoint ipm(data, param);

  const double target_gap = std::min(problem.tolerance() * 1e-2, 1e-9);
  auto outcome = ipm.solve(target_gap, problem.max_iterations());

  FitResult result;
  Eigen::VectorXd z = outcome.z;
  double upper = outcome.upper;
  const double floor = 1e-12 * static_cast<double>(data.n * K);
  // A vertex may cost a rounding error more than the interior point, as long
  // as the certified gap stays within the inner target.
  const double slack =
      std::isfinite(outcome.lower) ? std::max(target_gap * std::max(upper, floor) - (upper - outcome.lower), 0.0) : 0.0;
  if (auto vertex = ipm.polish(z, upper, slack)) {
    std::vector<double> residual;
    z = *vertex;
    upper = ipm.loss(z, residual);
    result.diagnostics.vertex_polished = true;
  }
  const double gap = std::max(upper - outcome.lower, 0.0);
  result.diagnostics.iterations = outcome.iterations;
  result.diagnostics.primal_residual = outcome.primal_residual;
  result.diagnostics.relative_gap = gap / std::max(upper, floor);
  if (!(result.diagnostics.relative_gap <= problem.tolerance())) {
    throw SolverError("solver stopped after " + std::to_string(outcome.iterations) +
                      " iterations with relative gap " + std::to_string(result.diagnostics.relative_gap) +
                      " (primal residual " + std::to_string(outcome.primal_residual) + ")");
  }

  const Eigen::VectorXd theta = param.expand(z);
  QuantileParamSet params;
  params.grid = problem.grid();
  params.regime = problem.regime();
  params.alphas.resize(K);
  params.betas.resize(K);
  const double alpha_scale = data.load_scale / data.energy_scale;
  const double beta_scale = data.load_scale / std::sqrt(data.energy_scale);
  for (std::size_t k = 0; k < K; ++k) {
    params.alphas[k] = theta[static_cast<Eigen::Index>(k)] * alpha_scale;
    params.betas[k] = theta[static_cast<Eigen::Index>(K + k)] * beta_scale;
  }
  const auto [lo, hi] = std::minmax_element(problem.records().begin(), problem.records().end(),
                                            [](const auto& a, const auto& b) { return a.energy < b.energy; });
  params.fit_ec_range = {lo->energy, hi->energy};

  result.achieved_apl = average_pinball_loss(problem.records(), params);
  result.parameter_count = parameter_count(problem.regime(), K);
  result.params = std::move(params);
  return result;
}

}  // namespace velander
