#include "lmesens/box_qp.hpp"

#include <Eigen/SparseCholesky>
#include <cmath>
#include <limits>
#include <sstream>

namespace lmesens {

namespace {

// Diagonal regularization of the augmented system, raised step by step
// when LDL' meets a zero pivot. Refinement removes its effect.
constexpr double kRegularization[] = {1e-10, 1e-8, 1e-6};
constexpr double kStepFraction = 0.995;
constexpr double kDivergence = 1e14;

double inf_norm(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

// Quasi-definite augmented system
//   [ -(H + Sigma + rho I)   A' ] [dx]   [r1]
//   [          A           dI  ] [ v] = [r2]
// factorized with LDL' and polished by iterative refinement against the
// unregularized matrix (rho = d = 0).
class AugmentedSystem {
 public:
  explicit AugmentedSystem(const SparseMatrix& a) : a_(a), at_(a.transpose()) {
    const Index n = a.cols();
    const Index m = a.rows();
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(n + m + a.nonZeros());
    for (Index i = 0; i < n + m; ++i) entries.emplace_back(i, i, 1.0);
    for (Index j = 0; j < a.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(a, j); it; ++it) entries.emplace_back(n + it.row(), j, it.value());
    k_.resize(n + m, n + m);
    k_.setFromTriplets(entries.begin(), entries.end());
    k_.makeCompressed();
    diag_slot_.resize(n + m);
    for (Index j = 0; j < n + m; ++j) {
      for (SparseMatrix::InnerIterator it(k_, j); it; ++it) {
        if (it.row() == j) {
          diag_slot_[j] = static_cast<Index>(&it.valueRef() - k_.valuePtr());
          break;
        }
      }
    }
    ldlt_.analyzePattern(k_);
  }

  bool factorize(const VectorXd& primal_diag) {
    diag_ = primal_diag;
    const Index n = a_.cols();
    for (double reg : kRegularization) {
      for (Index i = 0; i < n; ++i) k_.valuePtr()[diag_slot_[i]] = -(primal_diag[i] + reg);
      for (Index i = n; i < k_.rows(); ++i) k_.valuePtr()[diag_slot_[i]] = reg;
      ldlt_.factorize(k_);
      if (ldlt_.info() == Eigen::Success) return true;
    }
    return false;
  }

  VectorXd solve(const VectorXd& rhs) const {
    VectorXd sol = ldlt_.solve(rhs);
    const double scale = 1.0 + inf_norm(rhs);
    VectorXd r = rhs - apply_exact(sol);
    double r_norm = inf_norm(r);
    // Refinement against the unregularized matrix can diverge when that
    // matrix is nearly singular; keep the best iterate seen.
    for (int pass = 0; pass < 10 && r_norm > 1e-15 * scale; ++pass) {
      const VectorXd next = sol + ldlt_.solve(r);
      const VectorXd next_r = rhs - apply_exact(next);
      const double next_norm = inf_norm(next_r);
      if (!(next_norm < r_norm)) break;
      sol = next;
      r = next_r;
      r_norm = next_norm;
    }
    return sol;
  }

 private:
  VectorXd apply_exact(const VectorXd& v) const {
    const Index n = a_.cols();
    VectorXd out(v.size());
    out.head(n) = -diag_.cwiseProduct(v.head(n)) + at_ * v.tail(a_.rows());
    out.tail(a_.rows()) = a_ * v.head(n);
    return out;
  }

  SparseMatrix a_;
  SparseMatrix at_;
  SparseMatrix k_;
  std::vector<Index> diag_slot_;
  VectorXd diag_;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

}  // namespace

BoxQpSolution solve_box_qp(const BoxQp& qp, const BoxQpOptions& options) {
  const Index n = qp.n_vars();
  if (qp.hessian.size() != n || qp.lower.size() != n || qp.upper.size() != n ||
      qp.eq_matrix.cols() != n || qp.eq_matrix.rows() != qp.n_eqs())
    throw DimensionError("box QP data has inconsistent dimensions");
  if (options.tolerance <= 0.0) throw DomainError("tolerance must be positive");

  std::vector<bool> has_lo(n), has_hi(n);
  std::vector<Index> fixed;
  for (Index i = 0; i < n; ++i) {
    const double lo = qp.lower[i];
    const double hi = qp.upper[i];
    if (lo > hi) throw InfeasibleError("variable " + std::to_string(i) + " has lower > upper");
    if (std::isfinite(lo) && lo == hi) {
      fixed.push_back(i);
      continue;
    }
    has_lo[i] = std::isfinite(lo);
    has_hi[i] = std::isfinite(hi);
  }

  // Equality rows, extended with one row per pinned variable.
  const Index m0 = qp.n_eqs();
  const Index m = m0 + static_cast<Index>(fixed.size());
  SparseMatrix a(m, n);
  {
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(qp.eq_matrix.nonZeros() + fixed.size());
    for (Index j = 0; j < qp.eq_matrix.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(qp.eq_matrix, j); it; ++it)
        entries.emplace_back(it.row(), j, it.value());
    for (std::size_t f = 0; f < fixed.size(); ++f) entries.emplace_back(m0 + Index(f), fixed[f], 1.0);
    a.setFromTriplets(entries.begin(), entries.end());
    a.makeCompressed();
  }
  VectorXd b(m);
  b.head(m0) = qp.eq_rhs;
  for (std::size_t f = 0; f < fixed.size(); ++f) b[m0 + Index(f)] = qp.lower[fixed[f]];
  const SparseMatrix at = a.transpose();

  Index n_bounds = 0;
  VectorXd x = VectorXd::Zero(n);
  VectorXd zl = VectorXd::Zero(n);
  VectorXd zu = VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i) {
    if (has_lo[i] && has_hi[i]) {
      x[i] = 0.5 * (qp.lower[i] + qp.upper[i]);
    } else if (has_lo[i]) {
      x[i] = qp.lower[i] + 1.0;
    } else if (has_hi[i]) {
      x[i] = qp.upper[i] - 1.0;
    }
    if (has_lo[i]) zl[i] = 1.0, ++n_bounds;
    if (has_hi[i]) zu[i] = 1.0, ++n_bounds;
  }
  VectorXd y = VectorXd::Zero(m);

  AugmentedSystem system(a);
  VectorXd sl(n), su(n), rd(n), rp(m);

  // Slacks are recomputed from x, so near a bound x - lower can round to
  // zero. Flooring them at one ulp of the bound keeps z / slack finite.
  auto slacks = [&] {
    constexpr double ulp = std::numeric_limits<double>::epsilon();
    for (Index i = 0; i < n; ++i) {
      sl[i] = has_lo[i] ? std::max(x[i] - qp.lower[i], ulp * (1.0 + std::abs(qp.lower[i]))) : 1.0;
      su[i] = has_hi[i] ? std::max(qp.upper[i] - x[i], ulp * (1.0 + std::abs(qp.upper[i]))) : 1.0;
    }
  };
  auto max_complementarity = [&] {
    double worst = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (has_lo[i]) worst = std::max(worst, zl[i] * sl[i]);
      if (has_hi[i]) worst = std::max(worst, zu[i] * su[i]);
    }
    return worst;
  };

  struct Direction {
    VectorXd dx, dy, dzl, dzu;
  };
  auto solve_direction = [&](const VectorXd& rcl, const VectorXd& rcu) {
    VectorXd r1 = -rd;
    for (Index i = 0; i < n; ++i) {
      if (has_lo[i]) r1[i] -= rcl[i] / sl[i];
      if (has_hi[i]) r1[i] += rcu[i] / su[i];
    }
    VectorXd rhs(n + m);
    rhs.head(n) = -r1;
    rhs.tail(m) = -rp;
    const VectorXd sol = system.solve(rhs);
    Direction d;
    d.dx = sol.head(n);
    d.dy = -sol.tail(m);
    d.dzl = VectorXd::Zero(n);
    d.dzu = VectorXd::Zero(n);
    for (Index i = 0; i < n; ++i) {
      if (has_lo[i]) d.dzl[i] = (-rcl[i] - zl[i] * d.dx[i]) / sl[i];
      if (has_hi[i]) d.dzu[i] = (-rcu[i] + zu[i] * d.dx[i]) / su[i];
    }
    return d;
  };
  auto max_step = [&](const Direction& d) {
    double alpha = 1.0;
    for (Index i = 0; i < n; ++i) {
      if (has_lo[i]) {
        if (d.dx[i] < 0.0) alpha = std::min(alpha, -sl[i] / d.dx[i]);
        if (d.dzl[i] < 0.0) alpha = std::min(alpha, -zl[i] / d.dzl[i]);
      }
      if (has_hi[i]) {
        if (d.dx[i] > 0.0) alpha = std::min(alpha, su[i] / d.dx[i]);
        if (d.dzu[i] < 0.0) alpha = std::min(alpha, -zu[i] / d.dzu[i]);
      }
    }
    return alpha;
  };

  BoxQpSolution out;
  bool converged = false;
  int iter = 0;
  for (;; ++iter) {
    slacks();
    rd = qp.hessian.cwiseProduct(x) + qp.linear + at * y - zl + zu;
    rp = a * x - b;
    const double comp = max_complementarity();
    out.primal_residual = inf_norm(rp);
    out.dual_residual = inf_norm(rd);
    out.complementarity = comp;
    if (out.primal_residual <= options.tolerance && out.dual_residual <= options.tolerance &&
        comp <= options.tolerance) {
      converged = true;
      break;
    }
    if (iter >= options.max_iterations) break;
    if (!x.allFinite() || !y.allFinite() || inf_norm(x) > kDivergence || inf_norm(y) > kDivergence)
      break;

    VectorXd sigma_diag = qp.hessian;
    double mu = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (has_lo[i]) sigma_diag[i] += zl[i] / sl[i], mu += zl[i] * sl[i];
      if (has_hi[i]) sigma_diag[i] += zu[i] / su[i], mu += zu[i] * su[i];
    }
    if (n_bounds > 0) mu /= double(n_bounds);
    if (!system.factorize(sigma_diag)) break;

    VectorXd rcl = zl.cwiseProduct(sl);
    VectorXd rcu = zu.cwiseProduct(su);
    Direction d = solve_direction(rcl, rcu);
    if (n_bounds > 0) {
      const double alpha_aff = max_step(d);
      double mu_aff = 0.0;
      for (Index i = 0; i < n; ++i) {
        if (has_lo[i]) mu_aff += (zl[i] + alpha_aff * d.dzl[i]) * (sl[i] + alpha_aff * d.dx[i]);
        if (has_hi[i]) mu_aff += (zu[i] + alpha_aff * d.dzu[i]) * (su[i] - alpha_aff * d.dx[i]);
      }
      mu_aff /= double(n_bounds);
      const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);
      for (Index i = 0; i < n; ++i) {
        if (has_lo[i]) rcl[i] += d.dx[i] * d.dzl[i] - sigma * mu;
        if (has_hi[i]) rcu[i] += -d.dx[i] * d.dzu[i] - sigma * mu;
      }
      d = solve_direction(rcl, rcu);
    }
    const double alpha = std::min(1.0, kStepFraction * max_step(d));
    x += alpha * d.dx;
    y += alpha * d.dy;
    zl += alpha * d.dzl;
    zu += alpha * d.dzu;
  }
  out.iterations = iter;

  if (!converged) {
    std::ostringstream msg;
    msg << "interior point method stopped after " << iter << " iterations without reaching tolerance "
        << options.tolerance << " (primal " << out.primal_residual << ", dual " << out.dual_residual
        << ", complementarity " << out.complementarity << "); the problem is likely infeasible";
    throw InfeasibleError(msg.str());
  }

  out.x = x;
  out.y = y.head(m0);
  out.z_lower = zl;
  out.z_upper = zu;
  for (std::size_t f = 0; f < fixed.size(); ++f) {
    const double r = y[m0 + Index(f)];
    out.z_upper[fixed[f]] = std::max(r, 0.0);
    out.z_lower[fixed[f]] = std::max(-r, 0.0);
  }
  return out;
}

}  // namespace lmesens
