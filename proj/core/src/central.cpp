#include "lmesens/central.hpp"

#include "lmesens/factorization.hpp"
#include "lmesens/parallel.hpp"
#include "stopwatch.hpp"

namespace lmesens {

namespace {

constexpr Index kBlockColumns = 64;

void check_system(const DispatchCase& c, const KktSystem& kkt) {
  const DispatchLayout lay(c);
  if (kkt.dim_l != kkt_dimension(lay.n, lay.m, lay.k, lay.t) || kkt.d1F.rows() != kkt.dim_l ||
      kkt.d2F.cols() != lay.n * lay.t)
    throw DimensionError("KKT system was not assembled for this case");
}

}  // namespace

LmeResult lme_forward_central(const DispatchCase& c, const DispatchSolution& solution,
                              const KktSystem& kkt, std::size_t parallelism) {
  check_system(c, kkt);
  const Index nt = c.n_nodes() * c.horizon;
  const Index dim = kkt.dim_l;
  const Index g0 = kkt.index_map["g"].offset;
  LmeResult out = make_lme_result(Method::central_fwd, c.n_nodes(), c.horizon);
  out.degeneracy_flag = is_degenerate(c, solution);

  detail::Stopwatch clock;
  const SparseFactorization lu(kkt.d1F);
  out.timings.emplace_back("factorize", clock.lap());
  out.stats.factorizations = 1;

  const VectorXd e = c.emissions_rate.reshaped();
  const Index n_blocks = (nt + kBlockColumns - 1) / kBlockColumns;
  VectorXd lambda(nt);
  parallel_for(std::size_t(n_blocks), parallelism, [&](std::size_t b) {
    const Index first = Index(b) * kBlockColumns;
    const Index cols = std::min(kBlockColumns, nt - first);
    const MatrixXd rhs = -MatrixXd(kkt.d2F.middleCols(first, cols));
    const MatrixXd x = lu.solve(rhs);
    lambda.segment(first, cols) = x.middleRows(g0, nt).transpose() * e;
  });
  out.timings.emplace_back("solve", clock.lap());
  out.stats.forward_solve_columns = nt;
  out.stats.note_dense(dim, std::min(kBlockColumns, nt));

  out.lambda = lambda.reshaped(c.n_nodes(), c.horizon);
  return out;
}

LmeResult lme_reverse_central(const DispatchCase& c, const DispatchSolution& solution,
                              const KktSystem& kkt) {
  check_system(c, kkt);
  const Index nt = c.n_nodes() * c.horizon;
  LmeResult out = make_lme_result(Method::central_rev, c.n_nodes(), c.horizon);
  out.degeneracy_flag = is_degenerate(c, solution);

  detail::Stopwatch clock;
  const SparseFactorization lu(kkt.d1F);
  out.timings.emplace_back("factorize", clock.lap());
  out.stats.factorizations = 1;

  MatrixXd rhs = MatrixXd::Zero(kkt.dim_l, 1);
  rhs.col(0).segment(kkt.index_map["g"].offset, nt) = c.emissions_rate.reshaped();
  const MatrixXd x = lu.solve_transpose(rhs);
  out.timings.emplace_back("adjoint_solve", clock.lap());
  out.stats.adjoint_solve_columns = 1;
  out.stats.note_dense(kkt.dim_l, 1);

  // lambda = -d2F' x, and d2F is -1 on the balance rows.
  const VectorXd lambda = -(kkt.d2F.transpose() * x.col(0));
  out.lambda = lambda.reshaped(c.n_nodes(), c.horizon);
  return out;
}

}  // namespace lmesens
