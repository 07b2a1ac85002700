#pragma once

#include <vector>

#include "lmesens/block_tridiagonal.hpp"
#include "lmesens/factorization.hpp"
#include "lmesens/kkt.hpp"
#include "lmesens/lme.hpp"

namespace lmesens {

/// Temporal decomposition of the dispatch problem.
///
/// Period t owns g_t, theta_t, f_t, p_t, s_t and a copy snext_t of the next
/// state of charge. The global SOC row becomes the local row
///   w_t:  snext_t - s_t + p_t = 0
/// and the periods are tied together by the coupling constraints
///   h_t:  snext_t - s_{t+1} = 0     (s_T is the fixed s_final)
/// whose duals nu_t enter the Lagrangian as nu_t' h_t. Period 0 also owns
/// the init row. The final row and the variable s_T disappear because s_T
/// is fixed to s_final.

/// nu, K x T. Column t is the dual of h_t.
struct CouplingDuals {
  MatrixXd nu;
};

/// Recovers nu from a global solution. Stationarity of snext_t gives
/// w_t + nu_t = 0 and w_t is the global SOC dual, so nu = -dual_soc.
CouplingDuals extract_coupling_duals(const DispatchSolution& solution);

/// Optimal (g_t, p_t, s_t) of the period-t problem with nu held fixed.
struct LocalPeriodSolution {
  VectorXd g, p, s;
  int iterations = 0;
};

/// Solves the local problem of period t (0-based) directly, with snext_t
/// eliminated through w_t:
///   min c_t'g + eps/2 ||(g, theta, f, p, s)||^2 - nu_{t-1}'s + nu_t'(s - p)
/// subject to the period's balance, Kirchhoff and reference rows, the
/// boxes, and s = s_init at t = 0.
LocalPeriodSolution resolve_local_period(const DispatchCase& c, const CouplingDuals& nu, Index t,
                                         const DispatchOptions& options = {});

/// Positions inside the stacked local KKT vector of one period.
struct LocalLayout {
  Index n = 0, m = 0, k = 0, t = 0;
  bool first = false;

  LocalLayout() = default;
  LocalLayout(Index nodes, Index lines, Index batteries, Index period)
      : n(nodes), m(lines), k(batteries), t(period), first(period == 0) {}

  Index g(Index i) const { return i; }
  Index theta(Index i) const { return n + i; }
  Index f(Index l) const { return 2 * n + l; }
  Index p(Index b) const { return 2 * n + m + b; }
  Index s(Index b) const { return 2 * n + m + k + b; }
  Index snext(Index b) const { return 2 * n + m + 2 * k + b; }
  Index n_primal() const { return 2 * n + m + 3 * k; }

  Index balance(Index i) const { return n_primal() + i; }
  Index kirchhoff(Index l) const { return n_primal() + n + l; }
  Index reference() const { return n_primal() + n + m; }
  Index soc(Index b) const { return n_primal() + n + m + 1 + b; }
  Index init(Index b) const { return n_primal() + n + m + 1 + k + b; }
  Index n_rows() const { return n + m + 1 + k + (first ? k : 0); }

  // Box multipliers for g, f, p, s, lower side then upper side.
  Index n_bounded() const { return n + m + 2 * k; }
  Index mu_lower(Index j) const { return n_primal() + n_rows() + j; }
  Index mu_upper(Index j) const { return mu_lower(j) + n_bounded(); }

  /// 5N + 4M + 8K + 1, plus K for the first period.
  Index dim() const { return n_primal() + n_rows() + 2 * n_bounded(); }
};

struct LocalBlock {
  Index t = 0;
  LocalLayout layout;
  SparseMatrix d1F;    // L_t x L_t
  SparseMatrix dF_d;   // L_t x N, -1 on the balance rows
  SparseMatrix dF_nu;  // L_t x (K or 2K); columns nu_{t-1} (t > 0) then nu_t
  SparseMatrix Dh;     // TK x L_t: -1 at s_t in block t-1, +1 at snext_t in block t
  Index nu_first = 0;  // coupling block of the first dF_nu column
  double residual = 0.0;  // ||F_t||_inf at the restricted solution

  Index nu_blocks() const { return layout.k ? dF_nu.cols() / layout.k : 0; }
};

struct DecentralOptions {
  double reg_eps = 1e-6;
  double tol = 1e-8;  // bound on the local KKT residuals
  std::size_t parallelism = 1;
};

/// Extracts the T local KKT blocks from the global Jacobian by index.
/// Throws DomainError when a local residual exceeds options.tol, which
/// happens when nu does not belong to the solution.
std::vector<LocalBlock> build_local_blocks(const DispatchCase& c, const DispatchSolution& solution,
                                           const KktSystem& kkt, const CouplingDuals& nu,
                                           const DecentralOptions& options = {});
std::vector<LocalBlock> build_local_blocks(const DispatchCase& c, const DispatchSolution& solution,
                                           const CouplingDuals& nu, std::size_t parallelism,
                                           double reg_eps = 1e-6, double tol = 1e-8);

/// One factorization per block, in parallel. Degenerate blocks throw with
/// the period index attached.
std::vector<SparseFactorization> factorize_blocks(const std::vector<LocalBlock>& blocks,
                                                  std::size_t parallelism);

/// C = sum_t Dh_t dz_t/dnu together with the interface Jacobians
/// dz_t/dnu = -d1F_t^{-1} dF_nu_t.
struct CouplingSystem {
  BlockTridiagonal C;
  std::vector<MatrixXd> dz_dnu;

  /// Dh_t X for a block of local columns X (L_t x c); result is TK x c.
  static MatrixXd apply_coupling_map(const LocalBlock& block, const MatrixXd& x);
};

CouplingSystem assemble_coupling(const std::vector<LocalBlock>& blocks,
                                 const std::vector<SparseFactorization>& factors, std::size_t parallelism,
                                 SolveStats* stats = nullptr);
CouplingSystem assemble_coupling(const std::vector<LocalBlock>& blocks, std::size_t parallelism);

/// Forward mode: local Jacobians, the TK x NT coupling Jacobian and the
/// per-period generation Jacobians are formed explicitly.
LmeResult lme_forward_decentral(const DispatchCase& c, const DispatchSolution& solution,
                                const DecentralOptions& options = {});

/// Reverse mode in four stages: local adjoints, coupling assembly, one
/// coupling solve, local adjoints again. Dense intermediates are at most
/// L_t x 2K.
LmeResult lme_reverse_decentral(const DispatchCase& c, const DispatchSolution& solution,
                                const DecentralOptions& options = {});

}  // namespace lmesens
