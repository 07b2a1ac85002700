#pragma once

#include "lmesens/model.hpp"

namespace lmesens {

/// minimize    1/2 x' diag(hessian) x + linear' x
/// subject to  eq_matrix x = eq_rhs,  lower <= x <= upper
///
/// Bounds may be +-infinity. Lagrangian convention:
///   L = f(x) + y'(A x - b) + z_lower'(lower - x) + z_upper'(x - upper)
struct BoxQp {
  VectorXd hessian;  // diagonal, >= 0
  VectorXd linear;
  SparseMatrix eq_matrix;
  VectorXd eq_rhs;
  VectorXd lower;
  VectorXd upper;

  Index n_vars() const { return linear.size(); }
  Index n_eqs() const { return eq_rhs.size(); }
};

struct BoxQpSolution {
  VectorXd x;
  VectorXd y;
  VectorXd z_lower;  // zero where the lower bound is infinite
  VectorXd z_upper;
  int iterations = 0;
  double primal_residual = 0.0;   // ||A x - b||_inf
  double dual_residual = 0.0;     // ||H x + q + A'y - z_l + z_u||_inf
  double complementarity = 0.0;   // max z * slack
};

struct BoxQpOptions {
  double tolerance = 1e-8;  // absolute, applied to all three residuals
  int max_iterations = 200;
};

/// Mehrotra predictor-corrector interior point method.
///
/// Variables with lower == upper are pinned through an extra equality row and
/// their bound multipliers are recovered from its dual. Throws
/// InfeasibleError when the residuals do not reach the tolerance.
BoxQpSolution solve_box_qp(const BoxQp& qp, const BoxQpOptions& options = {});

}  // namespace lmesens
