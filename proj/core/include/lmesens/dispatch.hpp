#pragma once

#include "lmesens/box_qp.hpp"
#include "lmesens/model.hpp"

namespace lmesens {

/// Position of every primal variable and equality row of the dispatch
/// problem in the stacked vectors. Matrices are stored column-major, so
/// entry (i, t) of an R x T family sits at offset + i + R * t.
///
/// Primal order: g (NxT), theta (NxT), f (MxT), p (KxT), s (Kx(T+1)).
/// Row order:    balance (NxT), kirchhoff (MxT), reference (T),
///               soc (KxT), init (K), final (K).
struct DispatchLayout {
  Index n = 0, m = 0, k = 0, t = 0;

  explicit DispatchLayout(const DispatchCase& c)
      : n(c.n_nodes()), m(c.n_lines()), k(c.n_batteries()), t(c.horizon) {}
  DispatchLayout(Index nodes, Index lines, Index batteries, Index periods)
      : n(nodes), m(lines), k(batteries), t(periods) {}

  Index g(Index i, Index p) const { return i + n * p; }
  Index theta(Index i, Index p) const { return n * t + i + n * p; }
  Index f(Index l, Index p) const { return 2 * n * t + l + m * p; }
  Index p(Index b, Index per) const { return (2 * n + m) * t + b + k * per; }
  Index s(Index b, Index per) const { return (2 * n + m + k) * t + b + k * per; }  // per in [0, T]
  Index n_primal() const { return (2 * n + m + 2 * k) * t + k; }

  Index balance(Index i, Index p) const { return i + n * p; }
  Index kirchhoff(Index l, Index p) const { return n * t + l + m * p; }
  Index reference(Index p) const { return (n + m) * t + p; }
  Index soc(Index b, Index p) const { return (n + m + 1) * t + b + k * p; }
  Index init(Index b) const { return (n + m + k + 1) * t + b; }
  Index final_row(Index b) const { return (n + m + k + 1) * t + k + b; }
  Index n_rows() const { return (n + m + k + 1) * t + 2 * k; }
};

/// Nonnegative multipliers of the box constraints, one matrix per variable
/// family (same shapes as the primal blocks).
struct BoundMultipliers {
  MatrixXd g, f, p, s;
};

/// All primal and dual variables of the dispatch problem at optimality.
///
/// Duals follow the convention that the Lagrangian adds
/// dual * (lhs - rhs) for every equality, written as
///   balance:   g + B p - d - A f
///   kirchhoff: f - diag(b) A' theta
///   reference: theta(0, t)
///   soc:       s(t+1) - s(t) + p(t)
///   init:      s(0) - s_init,   final: s(T) - s_final
/// and mu_lower' (lower - x) + mu_upper' (x - upper) for the boxes.
/// With that convention dual_balance is minus the nodal price.
struct DispatchSolution {
  MatrixXd g, theta, f, p, s;
  MatrixXd dual_balance, dual_kirchhoff;
  VectorXd dual_ref;
  MatrixXd dual_soc;
  VectorXd dual_init, dual_final;
  BoundMultipliers mult_lower, mult_upper;
  double kkt_residual_norm = 0.0;
  double objective_value = 0.0;
  int iterations = 0;
};

struct DispatchOptions {
  double reg_eps = 1e-6;
  double tol = 1e-8;
  int max_iterations = 200;
};

/// The dispatch problem as a box QP, with every box (including the ones on
/// s(0) and s(T)) present.
BoxQp build_dispatch_qp(const DispatchCase& c, double reg_eps);

/// Solves the regularized dispatch problem
///   min c'g + reg_eps/2 ||(g, theta, f, p, s)||^2
/// to an absolute KKT residual of `tol`. Throws InfeasibleError.
DispatchSolution solve_dispatch(const DispatchCase& c, const DispatchOptions& options = {});
DispatchSolution solve_dispatch(const DispatchCase& c, double reg_eps, double tol);

/// ||F(z, d)||_inf of the KKT map at the given solution.
double kkt_residual(const DispatchCase& c, const DispatchSolution& solution, double reg_eps);

/// Stacked primal vector x and equality dual vector y.
VectorXd pack_primal(const DispatchSolution& solution);
VectorXd pack_equality_duals(const DispatchSolution& solution);

/// True when some box constraint has both its multiplier and its slack
/// below `threshold` (weak activity, where the KKT Jacobian is singular).
bool is_degenerate(const DispatchCase& c, const DispatchSolution& solution, double threshold = 1e-7);

}  // namespace lmesens
