#include <gtest/gtest.h>

#include <Eigen/LU>

#include "fixtures.hpp"
#include "lmesens/block_tridiagonal.hpp"

namespace lmesens {
namespace {

constexpr double kEps = 1e-6;

// ---- block tridiagonal solver ----

BlockTridiagonal random_block_tridiagonal(Index n, Index b, std::uint64_t seed) {
  std::srand(unsigned(seed));
  BlockTridiagonal m(n, b);
  for (Index i = 0; i < n; ++i) {
    m.diag(i) = MatrixXd::Random(b, b) + 4.0 * MatrixXd::Identity(b, b);
    if (i > 0) m.lower(i) = MatrixXd::Random(b, b);
    if (i + 1 < n) m.upper(i) = MatrixXd::Random(b, b);
  }
  return m;
}

TEST(BlockTridiagonal, SolveMatchesDenseLu) {
  const BlockTridiagonal m = random_block_tridiagonal(6, 3, 1);
  const MatrixXd rhs = MatrixXd::Random(18, 2);
  const MatrixXd dense = m.to_dense();
  EXPECT_LE((m.solve(rhs) - dense.lu().solve(rhs)).norm(), 1e-10);
  EXPECT_LE((m.solve_transpose(rhs) - dense.transpose().lu().solve(rhs)).norm(), 1e-10);
  EXPECT_LE((m.multiply(rhs) - dense * rhs).norm(), 1e-12);
  EXPECT_EQ(m.block(0, 3), MatrixXd::Zero(3, 3));
}

TEST(BlockTridiagonal, SingularPivotNamesTheBlock) {
  BlockTridiagonal m = random_block_tridiagonal(4, 2, 2);
  // Make block row 2 a copy of what elimination produces: zero it out.
  m.diag(2).setZero();
  m.lower(2).setZero();
  m.upper(2).setZero();
  try {
    m.solve(MatrixXd::Ones(8, 1));
    FAIL() << "expected DegenerateError";
  } catch (const DegenerateError& e) {
    EXPECT_EQ(e.period(), 2);
  }
}

TEST(BlockTridiagonal, EmptySystem) {
  const BlockTridiagonal m(3, 0);
  EXPECT_EQ(m.rows(), 0);
  EXPECT_EQ(m.solve(MatrixXd(0, 1)).rows(), 0);
}

// ---- coupling duals and local problems ----

TEST(CouplingDuals, EmptyWithoutBatteries) {
  const DispatchSolution s = solve_dispatch(generate_synthetic(4, 0, 3, 1));
  const CouplingDuals nu = extract_coupling_duals(s);
  EXPECT_EQ(nu.nu.rows(), 0);
  EXPECT_EQ(nu.nu.cols(), 3);
}

TEST(CouplingDuals, AreMinusTheStateOfChargeDuals) {
  const DispatchSolution s = solve_dispatch(testing::case2b());
  EXPECT_EQ(extract_coupling_duals(s).nu, -s.dual_soc);
}

// Local problems react to nu with gain ~1 / reg_eps, so their distance to
// the global solution is bounded by about solver tolerance / reg_eps. The
// solves therefore run at 1e-11.
void expect_local_consistency(const DispatchCase& c, double tolerance) {
  const DispatchOptions tight{kEps, 1e-11, 200};
  const DispatchSolution s = solve_dispatch(c, tight);
  const CouplingDuals nu = extract_coupling_duals(s);
  for (Index t = 0; t < c.horizon; ++t) {
    const LocalPeriodSolution loc = resolve_local_period(c, nu, t, tight);
    EXPECT_LE((loc.g - s.g.col(t)).lpNorm<Eigen::Infinity>(), tolerance) << "period " << t;
    EXPECT_LE((loc.p - s.p.col(t)).lpNorm<Eigen::Infinity>(), tolerance) << "period " << t;
    EXPECT_LE((loc.s - s.s.col(t)).lpNorm<Eigen::Infinity>(), tolerance) << "period " << t;
  }
}

TEST(LocalResolve, Case2bReproducesTheGlobalSolution) { expect_local_consistency(testing::case2b(), 1e-6); }

TEST(LocalResolve, HoldsForABatteryWithoutPower) {
  DispatchCase c = testing::case2b();
  c.network.p_max[0] = 0.0;
  expect_local_consistency(c, 1e-6);
}

TEST(LocalResolve, HoldsOnRandomCasesToTheConditioningBound) {
  for (std::uint64_t seed : {3u, 8u, 21u}) expect_local_consistency(generate_synthetic(7, 2, 5, seed), 1e-11 / kEps);
}

TEST(LocalResolve, RejectsPeriodOutOfRange) {
  const DispatchCase c = testing::case2b();
  const CouplingDuals nu = extract_coupling_duals(solve_dispatch(c));
  EXPECT_THROW(resolve_local_period(c, nu, 2, {}), DomainError);
}

// ---- local blocks ----

TEST(LocalBlocks, Case2bDimensionsByHand) {
  const testing::Solved s = testing::solve_case(testing::case2b());
  const auto blocks = build_local_blocks(s.c, s.sol, s.kkt, extract_coupling_duals(s.sol));
  ASSERT_EQ(blocks.size(), 2u);
  // g(2) theta(2) f(1) p(1) s(1) snext(1) = 8 primal; balance(2) kirchhoff(1)
  // reference(1) soc(1) = 5 rows, plus init in period 0; 2 x (2+1+1+1) = 10
  // multipliers.
  EXPECT_EQ(blocks[0].layout.dim(), 8 + 6 + 10);
  EXPECT_EQ(blocks[1].layout.dim(), 8 + 5 + 10);
  for (const LocalBlock& b : blocks) {
    EXPECT_EQ(b.d1F.rows(), b.layout.dim());
    EXPECT_EQ(b.dF_d.cols(), 2);
    EXPECT_EQ(b.dF_d.nonZeros(), 2);
    EXPECT_EQ(b.Dh.rows(), 2);
    EXPECT_LE(b.residual, 1e-8);
  }
  EXPECT_EQ(blocks[0].Dh.nonZeros(), 1);  // period 0's s is the fixed initial state
  EXPECT_EQ(blocks[1].Dh.nonZeros(), 2);
  EXPECT_EQ(blocks[0].dF_nu.cols(), 1);
  EXPECT_EQ(blocks[1].dF_nu.cols(), 2);
  EXPECT_EQ(blocks[1].nu_first, 0);
}

TEST(LocalBlocks, DimensionFormula) {
  const LocalLayout first(5, 7, 2, 0), later(5, 7, 2, 3);
  EXPECT_EQ(later.dim(), 5 * 5 + 4 * 7 + 8 * 2 + 1);
  EXPECT_EQ(first.dim(), later.dim() + 2);
}

TEST(LocalBlocks, SinglePeriodHasOneBlock) {
  const testing::Solved s = testing::solve_case(generate_synthetic(4, 1, 1, 2));
  const auto blocks = build_local_blocks(s.c, s.sol, s.kkt, extract_coupling_duals(s.sol));
  ASSERT_EQ(blocks.size(), 1u);
  // The only coupling row ties snext to the fixed final state.
  EXPECT_EQ(blocks[0].dF_nu.cols(), 1);
  EXPECT_EQ(blocks[0].Dh.nonZeros(), 1);
}

TEST(LocalBlocks, WrongDualsAreRejected) {
  const testing::Solved s = testing::solve_case(testing::case2b());
  CouplingDuals nu = extract_coupling_duals(s.sol);
  nu.nu(0, 0) += 1.0;
  EXPECT_THROW(build_local_blocks(s.c, s.sol, s.kkt, nu), DomainError);
}

TEST(LocalBlocks, AreTheGlobalJacobianRestricted) {
  // Stacking the blocks, with the nu columns tied back to the global SOC
  // duals, must reproduce the global forward sensitivities.
  const testing::Solved s = testing::solve_case(generate_synthetic(6, 2, 4, 12));
  const LmeResult central = lme_forward_central(s.c, s.sol, s.kkt);
  const LmeResult local = lme_forward_decentral(s.c, s.sol);
  EXPECT_LE((central.lambda - local.lambda).lpNorm<Eigen::Infinity>(), 1e-8);
}

// ---- coupling system ----

TEST(CouplingSystem, EmptyWithoutBatteries) {
  const testing::Solved s = testing::solve_case(generate_synthetic(5, 0, 4, 3));
  const CouplingSystem cs = assemble_coupling(build_local_blocks(s.c, s.sol, s.kkt, extract_coupling_duals(s.sol)), 1);
  EXPECT_EQ(cs.C.rows(), 0);
}

TEST(CouplingSystem, Case2bIsTwoByTwoWithCoupling) {
  const testing::Solved s = testing::solve_case(testing::case2b());
  const CouplingSystem cs = assemble_coupling(build_local_blocks(s.c, s.sol, s.kkt, extract_coupling_duals(s.sol)), 1);
  const MatrixXd C = cs.C.to_dense();
  ASSERT_EQ(C.rows(), 2);
  ASSERT_EQ(C.cols(), 2);
  EXPECT_NE(C(0, 1), 0.0);
  EXPECT_NE(C(1, 0), 0.0);
  EXPECT_GT(std::abs(C.determinant()), 0.0);
}

TEST(CouplingSystem, IsBlockTridiagonal) {
  const testing::Solved s = testing::solve_case(generate_synthetic(6, 2, 6, 4));
  const auto blocks = build_local_blocks(s.c, s.sol, s.kkt, extract_coupling_duals(s.sol));
  const CouplingSystem cs = assemble_coupling(blocks, 1);
  const MatrixXd C = cs.C.to_dense();
  // Recompute sum_t Dh_t dz_t/dnu densely and compare.
  MatrixXd full = MatrixXd::Zero(12, 12);
  for (std::size_t t = 0; t < blocks.size(); ++t) {
    const MatrixXd contrib = MatrixXd(blocks[t].Dh) * cs.dz_dnu[t];
    full.middleCols(blocks[t].nu_first * 2, contrib.cols()) += contrib;
  }
  EXPECT_LE((C - full).lpNorm<Eigen::Infinity>(), 1e-9 * (1.0 + full.lpNorm<Eigen::Infinity>()));
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 6; ++j)
      if (std::abs(i - j) > 1) EXPECT_EQ(cs.C.block(i, j).norm(), 0.0);
}

// Dnu from the coupling system against central differences of the
// extracted duals. Dual sensitivities are of order reg_eps, so a larger
// regularization keeps them far above the solver tolerance.
TEST(CouplingSystem, JacobianOfDualsMatchesFiniteDifferences) {
  const double eps = 1e-2;
  const double tol = 1e-10;
  for (std::uint64_t seed : {2u, 5u}) {
    const DispatchCase c = generate_synthetic(3, 1, 3, seed);
    const DispatchSolution sol = solve_dispatch(c, eps, tol);
    const KktSystem kkt = assemble_kkt(c, sol, eps);
    const DecentralOptions opt{eps, 1e-8, 1};
    const auto blocks = build_local_blocks(c, sol, kkt, extract_coupling_duals(sol), opt);
    const CouplingSystem cs = assemble_coupling(blocks, 1);
    const Index n = c.n_nodes(), T = c.horizon, K = c.n_batteries();

    // R = sum_t Dh_t dz_t/dd_t, then Dnu = -C^{-1} R.
    MatrixXd R = MatrixXd::Zero(T * K, n * T);
    for (Index t = 0; t < T; ++t) {
      const SparseFactorization f(blocks[t].d1F);
      const MatrixXd dz = -f.solve(MatrixXd(blocks[t].dF_d));
      R.middleCols(n * t, n) = CouplingSystem::apply_coupling_map(blocks[t], dz);
    }
    const MatrixXd dnu = -cs.C.solve(R);

    for (Index j = 0; j < n * T; ++j) {
      const double h = 1e-5 * std::max(1.0, std::abs(c.demand(j % n, j / n)));
      DispatchCase up = c, down = c;
      up.demand(j % n, j / n) += h;
      down.demand(j % n, j / n) -= h;
      const MatrixXd nu_up = extract_coupling_duals(solve_dispatch(up, eps, tol)).nu;
      const MatrixXd nu_down = extract_coupling_duals(solve_dispatch(down, eps, tol)).nu;
      const MatrixXd fd = (nu_up - nu_down) / (2 * h);
      const VectorXd fd_col = Eigen::Map<const VectorXd>(fd.data(), fd.size());
      for (Index r = 0; r < T * K; ++r) {
        const double scale = std::max(std::abs(dnu(r, j)), 1e-4);
        EXPECT_LE(std::abs(fd_col[r] - dnu(r, j)) / scale, 1e-3) << "seed " << seed << " row " << r << " col " << j;
      }
    }
  }
}

// ---- LMEs ----

TEST(DecentralLme, WithoutBatteriesEqualsPerPeriodCentral) {
  const DispatchCase c = generate_synthetic(6, 0, 4, 17);
  const DispatchSolution s = solve_dispatch(c);
  const LmeResult fwd = lme_forward_decentral(c, s);
  const LmeResult rev = lme_reverse_decentral(c, s);
  for (Index t = 0; t < c.horizon; ++t) {
    DispatchCase one = c;
    one.horizon = 1;
    one.cost = c.cost.col(t);
    one.demand = c.demand.col(t);
    one.g_max = c.g_max.col(t);
    one.emissions_rate = c.emissions_rate.col(t);
    const testing::Solved p = testing::solve_case(one);
    const MatrixXd expect = lme_reverse_central(p.c, p.sol, p.kkt).lambda;
    EXPECT_LE((fwd.lambda.col(t) - expect).lpNorm<Eigen::Infinity>(), 1e-7) << t;
    EXPECT_LE((rev.lambda.col(t) - expect).lpNorm<Eigen::Infinity>(), 1e-7) << t;
  }
  EXPECT_EQ(rev.stats.coupling_solves, 0);
}

TEST(DecentralLme, Case2bAgreesWithCentral) {
  const testing::Solved s = testing::solve_case(testing::case2b());
  const MatrixXd central = lme_reverse_central(s.c, s.sol, s.kkt).lambda;
  const MatrixXd fwd = lme_forward_decentral(s.c, s.sol).lambda;
  const MatrixXd rev = lme_reverse_decentral(s.c, s.sol).lambda;
  EXPECT_LE((fwd - central).lpNorm<Eigen::Infinity>(), 1e-6);
  EXPECT_LE((rev - fwd).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(DecentralLme, ZeroEmissionRatesGiveZero) {
  DispatchCase c = generate_synthetic(6, 2, 5, 4);
  c.emissions_rate.setZero();
  const DispatchSolution s = solve_dispatch(c);
  EXPECT_TRUE((lme_forward_decentral(c, s).lambda.array() == 0.0).all());
  EXPECT_TRUE((lme_reverse_decentral(c, s).lambda.array() == 0.0).all());
}

TEST(DecentralLme, ReverseMatchesFiniteDifferencesOnMidSizeCase) {
  const DispatchCase c = generate_synthetic(20, 2, 24, 1);
  const DispatchSolution s = solve_dispatch(c);
  ASSERT_FALSE(is_degenerate(c, s));
  FiniteDifferenceOptions fd;
  fd.entries = testing::sample_entries(c, 60);
  const LmeResult oracle = lme_finite_difference(c, fd);
  const LmeComparison cmp = compare_lme(lme_reverse_decentral(c, s), oracle);
  EXPECT_GE(cmp.compared, 50);
  EXPECT_LE(cmp.max_rel_diff, 1e-3);
}

TEST(DecentralLme, ReverseWorkCounters) {
  const DispatchCase c = generate_synthetic(10, 3, 8, 6);
  const DispatchSolution s = solve_dispatch(c);
  const LmeResult rev = lme_reverse_decentral(c, s);
  const Index T = c.horizon, K = c.n_batteries();
  EXPECT_EQ(rev.stats.factorizations, T);
  EXPECT_LE(rev.stats.adjoint_solve_columns, 2 * T);
  EXPECT_LE(rev.stats.forward_solve_columns, 2 * K * T);
  EXPECT_EQ(rev.stats.coupling_solves, 1);
  // No intermediate as wide as the NT demand directions.
  const Index widest_block = LocalLayout(c.n_nodes(), c.n_lines(), K, 0).dim();
  EXPECT_LE(rev.stats.largest_dense_entries, std::max(widest_block * 2 * K, T * K * T * K));
  EXPECT_LT(rev.stats.largest_dense_entries, widest_block * c.n_nodes() * T);
}

TEST(DecentralLme, StagesAreRecordedInOrder) {
  const DispatchCase c = testing::case2b();
  const DispatchSolution s = solve_dispatch(c);
  const LmeResult rev = lme_reverse_decentral(c, s);
  std::vector<std::string> names;
  for (const auto& [name, sec] : rev.timings) names.push_back(name);
  EXPECT_EQ(names, (std::vector<std::string>{"assemble_blocks", "factorize", "local_adjoint", "coupling_jacobians",
                                             "coupling_solve", "local_adjoint_correction"}));
  EXPECT_DOUBLE_EQ(rev.linear_solve_seconds() + rev.stage_seconds("assemble_blocks"),
                   [&] { double sum = 0; for (const auto& st : rev.timings) sum += st.second; return sum; }());
}

TEST(DecentralLme, BitwiseIndependentOfWorkerCount) {
  const DispatchCase c = generate_synthetic(12, 3, 10, 8);
  const DispatchSolution s = solve_dispatch(c);
  const MatrixXd fwd1 = lme_forward_decentral(c, s, {1e-6, 1e-8, 1}).lambda;
  const MatrixXd rev1 = lme_reverse_decentral(c, s, {1e-6, 1e-8, 1}).lambda;
  for (std::size_t p : {2u, 8u}) {
    EXPECT_TRUE(lme_forward_decentral(c, s, {1e-6, 1e-8, p}).lambda == fwd1) << p;
    EXPECT_TRUE(lme_reverse_decentral(c, s, {1e-6, 1e-8, p}).lambda == rev1) << p;
  }
}

TEST(DecentralLme, SingularCouplingReportsItsPeriod) {
  // A battery that starts and ends full has its state pinned to s_max with a
  // vanishing multiplier, and the coupling system loses rank.
  DispatchCase c = testing::case2b();
  c.network.s_init[0] = c.network.s_max[0];
  c.network.s_final[0] = c.network.s_max[0];
  const DispatchSolution s = solve_dispatch(c);
  EXPECT_TRUE(is_degenerate(c, s));
  try {
    lme_reverse_decentral(c, s);
    FAIL() << "expected DegenerateError";
  } catch (const DegenerateError& e) {
    EXPECT_EQ(e.period(), 1);
  }
  EXPECT_THROW(lme_forward_decentral(c, s), DegenerateError);
}

}  // namespace
}  // namespace lmesens
