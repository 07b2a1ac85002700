#include "lmesens/decentral.hpp"

#include <cmath>
#include <limits>

#include "lmesens/parallel.hpp"
#include "stopwatch.hpp"

namespace lmesens {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Period and local position of every global KKT index; period -1 marks the
// entries that belong to no block (s_T, the final rows and their boxes).
struct Ownership {
  std::vector<int> period;
  std::vector<Index> local;
};

Ownership map_ownership(const KktIndexMap& map) {
  const DispatchLayout& lay = map.layout();
  const Index n = lay.n, m = lay.m, k = lay.k, T = lay.t;
  Ownership own;
  own.period.assign(map.dim(), -1);
  own.local.assign(map.dim(), -1);
  auto set = [&](Index global, Index t, Index local) {
    own.period[global] = int(t);
    own.local[global] = local;
  };
  const Index nx = map.dual_offset();
  const Index lo = map.mu_lower_offset();
  const Index hi = map.mu_upper_offset();
  // Bounded variables are g, f, p, s in that order (theta is free).
  const Index mu_f = n * T, mu_p = mu_f + m * T, mu_s = mu_p + k * T;
  for (Index t = 0; t < T; ++t) {
    const LocalLayout loc(n, m, k, t);
    for (Index i = 0; i < n; ++i) {
      set(lay.g(i, t), t, loc.g(i));
      set(lay.theta(i, t), t, loc.theta(i));
      set(nx + lay.balance(i, t), t, loc.balance(i));
      set(lo + i + n * t, t, loc.mu_lower(i));
      set(hi + i + n * t, t, loc.mu_upper(i));
    }
    for (Index l = 0; l < m; ++l) {
      set(lay.f(l, t), t, loc.f(l));
      set(nx + lay.kirchhoff(l, t), t, loc.kirchhoff(l));
      set(lo + mu_f + l + m * t, t, loc.mu_lower(n + l));
      set(hi + mu_f + l + m * t, t, loc.mu_upper(n + l));
    }
    set(nx + lay.reference(t), t, loc.reference());
    for (Index b = 0; b < k; ++b) {
      set(lay.p(b, t), t, loc.p(b));
      set(lay.s(b, t), t, loc.s(b));
      set(nx + lay.soc(b, t), t, loc.soc(b));
      set(lo + mu_p + b + k * t, t, loc.mu_lower(n + m + b));
      set(hi + mu_p + b + k * t, t, loc.mu_upper(n + m + b));
      set(lo + mu_s + b + k * t, t, loc.mu_lower(n + m + k + b));
      set(hi + mu_s + b + k * t, t, loc.mu_upper(n + m + k + b));
      if (t == 0) set(nx + lay.init(b), t, loc.init(b));
    }
  }
  return own;
}

SparseMatrix from_triplets(Index rows, Index cols, const std::vector<Eigen::Triplet<double>>& e) {
  SparseMatrix out(rows, cols);
  out.setFromTriplets(e.begin(), e.end());
  out.makeCompressed();
  return out;
}

void check_solution_shape(const DispatchCase& c, const DispatchSolution& solution) {
  if (solution.g.rows() != c.n_nodes() || solution.g.cols() != c.horizon)
    throw DimensionError("solution does not match the case");
}

}  // namespace

CouplingDuals extract_coupling_duals(const DispatchSolution& solution) {
  return CouplingDuals{-solution.dual_soc};
}

LocalPeriodSolution resolve_local_period(const DispatchCase& c, const CouplingDuals& nu, Index t,
                                         const DispatchOptions& options) {
  const Network& net = c.network;
  const Index n = c.n_nodes(), m = c.n_lines(), k = c.n_batteries();
  if (t < 0 || t >= c.horizon) throw DomainError("period out of range");
  if (nu.nu.rows() != k || nu.nu.cols() != c.horizon) throw DimensionError("nu must be K x T");

  // Variables g, theta, f, p, s; rows balance, kirchhoff, reference, init.
  const LocalLayout loc(n, m, k, t);
  const Index nx = 2 * n + m + 2 * k;
  const Index nr = n + m + 1 + (t == 0 ? k : 0);
  BoxQp qp;
  qp.hessian = VectorXd::Constant(nx, options.reg_eps);
  qp.linear = VectorXd::Zero(nx);
  qp.lower = VectorXd::Constant(nx, -kInf);
  qp.upper = VectorXd::Constant(nx, kInf);
  qp.eq_rhs = VectorXd::Zero(nr);
  std::vector<Eigen::Triplet<double>> a;
  for (Index i = 0; i < n; ++i) {
    qp.linear[loc.g(i)] = c.cost(i, t);
    qp.lower[loc.g(i)] = 0.0;
    qp.upper[loc.g(i)] = c.g_max(i, t);
    a.emplace_back(i, loc.g(i), 1.0);
    qp.eq_rhs[i] = c.demand(i, t);
  }
  for (Index l = 0; l < m; ++l) {
    qp.lower[loc.f(l)] = -net.f_max[l];
    qp.upper[loc.f(l)] = net.f_max[l];
    a.emplace_back(net.line_from[l], loc.f(l), -1.0);
    a.emplace_back(net.line_to[l], loc.f(l), 1.0);
    a.emplace_back(n + l, loc.f(l), 1.0);
    a.emplace_back(n + l, loc.theta(net.line_from[l]), -net.susceptance[l]);
    a.emplace_back(n + l, loc.theta(net.line_to[l]), net.susceptance[l]);
  }
  a.emplace_back(n + m, loc.theta(0), 1.0);
  for (Index b = 0; b < k; ++b) {
    qp.lower[loc.p(b)] = -net.p_max[b];
    qp.upper[loc.p(b)] = net.p_max[b];
    a.emplace_back(net.battery_node[b], loc.p(b), 1.0);
    qp.linear[loc.s(b)] = nu.nu(b, t) - (t > 0 ? nu.nu(b, t - 1) : 0.0);
    qp.linear[loc.p(b)] = -nu.nu(b, t);
    if (t == 0) {
      a.emplace_back(n + m + 1 + b, loc.s(b), 1.0);
      qp.eq_rhs[n + m + 1 + b] = net.s_init[b];
    } else {
      qp.lower[loc.s(b)] = 0.0;
      qp.upper[loc.s(b)] = net.s_max[b];
    }
  }
  qp.eq_matrix = from_triplets(nr, nx, a);

  const BoxQpSolution sol = solve_box_qp(qp, BoxQpOptions{options.tol, options.max_iterations});
  LocalPeriodSolution out;
  out.g = sol.x.segment(loc.g(0), n);
  out.p = sol.x.segment(loc.p(0), k);
  out.s = sol.x.segment(loc.s(0), k);
  out.iterations = sol.iterations;
  return out;
}

std::vector<LocalBlock> build_local_blocks(const DispatchCase& c, const DispatchSolution& solution,
                                           const KktSystem& kkt, const CouplingDuals& nu,
                                           const DecentralOptions& options) {
  check_solution_shape(c, solution);
  const DispatchLayout& lay = kkt.index_map.layout();
  const Index n = lay.n, m = lay.m, k = lay.k, T = lay.t;
  if (n != c.n_nodes() || T != c.horizon || m != c.n_lines() || k != c.n_batteries())
    throw DimensionError("KKT system was not assembled for this case");
  if (nu.nu.rows() != k || nu.nu.cols() != T) throw DimensionError("nu must be K x T");

  const Ownership own = map_ownership(kkt.index_map);
  std::vector<std::vector<Eigen::Triplet<double>>> entries(T);
  for (Index j = 0; j < kkt.d1F.outerSize(); ++j) {
    const int pc = own.period[j];
    if (pc < 0) continue;
    for (SparseMatrix::InnerIterator it(kkt.d1F, j); it; ++it) {
      if (own.period[it.row()] == pc) entries[pc].emplace_back(own.local[it.row()], own.local[j], it.value());
    }
  }
  const VectorXd global_f = kkt_map(c, pack_kkt_point(c, solution), options.reg_eps);
  std::vector<double> residual(T, 0.0);
  for (Index g = 0; g < Index(own.period.size()); ++g)
    if (own.period[g] >= 0) residual[own.period[g]] = std::max(residual[own.period[g]], std::abs(global_f[g]));

  std::vector<LocalBlock> blocks(T);
  parallel_for(std::size_t(T), options.parallelism, [&](std::size_t ti) {
    const Index t = Index(ti);
    LocalBlock& blk = blocks[ti];
    blk.t = t;
    blk.layout = LocalLayout(n, m, k, t);
    const LocalLayout& loc = blk.layout;
    const Index dim = loc.dim();

    auto& e = entries[ti];
    for (Index b = 0; b < k; ++b) {
      e.emplace_back(loc.soc(b), loc.snext(b), 1.0);
      e.emplace_back(loc.snext(b), loc.soc(b), 1.0);
    }
    blk.d1F = from_triplets(dim, dim, e);

    std::vector<Eigen::Triplet<double>> d;
    for (Index i = 0; i < n; ++i) d.emplace_back(loc.balance(i), i, -1.0);
    blk.dF_d = from_triplets(dim, n, d);

    // nu_{t-1} enters the s_t stationarity rows with -1, nu_t the snext_t
    // rows with +1.
    blk.nu_first = t > 0 ? t - 1 : 0;
    std::vector<Eigen::Triplet<double>> v, h;
    const Index prev = t > 0 ? k : 0;
    for (Index b = 0; b < k; ++b) {
      if (t > 0) {
        v.emplace_back(loc.s(b), b, -1.0);
        h.emplace_back((t - 1) * k + b, loc.s(b), -1.0);
      }
      v.emplace_back(loc.snext(b), prev + b, 1.0);
      h.emplace_back(t * k + b, loc.snext(b), 1.0);
    }
    blk.dF_nu = from_triplets(dim, prev + k, v);
    blk.Dh = from_triplets(T * k, dim, h);

    double res = residual[ti];
    for (Index b = 0; b < k; ++b) res = std::max(res, std::abs(solution.dual_soc(b, t) + nu.nu(b, t)));
    blk.residual = res;
  });

  for (const LocalBlock& blk : blocks) {
    if (!(blk.residual <= options.tol))
      throw DomainError("local KKT residual " + std::to_string(blk.residual) + " at period " +
                        std::to_string(blk.t + 1) + " exceeds tolerance; nu does not match the solution");
  }
  return blocks;
}

std::vector<LocalBlock> build_local_blocks(const DispatchCase& c, const DispatchSolution& solution,
                                           const CouplingDuals& nu, std::size_t parallelism,
                                           double reg_eps, double tol) {
  const KktSystem kkt = assemble_kkt(c, solution, reg_eps);
  return build_local_blocks(c, solution, kkt, nu, DecentralOptions{reg_eps, tol, parallelism});
}

std::vector<SparseFactorization> factorize_blocks(const std::vector<LocalBlock>& blocks,
                                                  std::size_t parallelism) {
  std::vector<std::unique_ptr<SparseFactorization>> slots(blocks.size());
  parallel_for(blocks.size(), parallelism, [&](std::size_t t) {
    slots[t] = std::make_unique<SparseFactorization>(blocks[t].d1F, long(blocks[t].t));
  });
  std::vector<SparseFactorization> out;
  out.reserve(blocks.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

MatrixXd CouplingSystem::apply_coupling_map(const LocalBlock& block, const MatrixXd& x) {
  return block.Dh * x;
}

CouplingSystem assemble_coupling(const std::vector<LocalBlock>& blocks,
                                 const std::vector<SparseFactorization>& factors, std::size_t parallelism,
                                 SolveStats* stats) {
  if (factors.size() != blocks.size()) throw DimensionError("one factorization per block expected");
  const Index T = Index(blocks.size());
  const Index k = T ? blocks.front().layout.k : 0;
  CouplingSystem sys;
  sys.C = BlockTridiagonal(k ? T : 0, k);
  sys.dz_dnu.resize(blocks.size());
  if (k == 0) return sys;

  // Per period: dz/dnu and the nonzero row blocks of Dh_t dz/dnu.
  std::vector<MatrixXd> local(blocks.size());
  parallel_for(blocks.size(), parallelism, [&](std::size_t t) {
    const LocalBlock& blk = blocks[t];
    sys.dz_dnu[t] = factors[t].solve(-MatrixXd(blk.dF_nu));
    const MatrixXd dh = blk.Dh * sys.dz_dnu[t];
    local[t] = dh.middleRows(blk.nu_first * k, blk.nu_blocks() * k);
  });

  for (Index t = 0; t < T; ++t) {
    const LocalBlock& blk = blocks[t];
    const Index nb = blk.nu_blocks();
    for (Index r = 0; r < nb; ++r) {
      for (Index q = 0; q < nb; ++q) {
        const Index i = blk.nu_first + r;
        const Index j = blk.nu_first + q;
        const auto part = local[t].block(r * k, q * k, k, k);
        if (i == j) sys.C.diag(i) += part;
        else if (i == j + 1) sys.C.lower(i) += part;
        else sys.C.upper(i) += part;
      }
    }
    if (stats) {
      stats->forward_solve_columns += blk.dF_nu.cols();
      stats->note_dense(blk.layout.dim(), blk.dF_nu.cols());
    }
  }
  return sys;
}

CouplingSystem assemble_coupling(const std::vector<LocalBlock>& blocks, std::size_t parallelism) {
  return assemble_coupling(blocks, factorize_blocks(blocks, parallelism), parallelism);
}

namespace {

struct Prepared {
  KktSystem kkt;
  std::vector<LocalBlock> blocks;
  std::vector<SparseFactorization> factors;
};

Prepared prepare(const DispatchCase& c, const DispatchSolution& solution, const DecentralOptions& options,
                 LmeResult& out, detail::Stopwatch& clock) {
  KktSystem kkt = assemble_kkt(c, solution, options.reg_eps);
  auto blocks = build_local_blocks(c, solution, kkt, extract_coupling_duals(solution), options);
  out.timings.emplace_back("assemble_blocks", clock.lap());
  auto factors = factorize_blocks(blocks, options.parallelism);
  out.timings.emplace_back("factorize", clock.lap());
  out.stats.factorizations = long(factors.size());
  return Prepared{std::move(kkt), std::move(blocks), std::move(factors)};
}

}  // namespace

LmeResult lme_forward_decentral(const DispatchCase& c, const DispatchSolution& solution,
                                const DecentralOptions& options) {
  const Index n = c.n_nodes(), k = c.n_batteries(), T = c.horizon;
  LmeResult out = make_lme_result(Method::decentral_fwd, n, T);
  out.degeneracy_flag = is_degenerate(c, solution);
  detail::Stopwatch clock;
  const Prepared prep = prepare(c, solution, options, out, clock);
  const auto& blocks = prep.blocks;

  // Local Jacobians dz_t/dd_t = -d1F_t^{-1} dF_d_t.
  std::vector<MatrixXd> dz_dd(T);
  parallel_for(std::size_t(T), options.parallelism, [&](std::size_t t) {
    dz_dd[t] = prep.factors[t].solve(-MatrixXd(blocks[t].dF_d));
  });
  out.timings.emplace_back("local_jacobians", clock.lap());
  out.stats.forward_solve_columns += n * T;
  if (T) out.stats.note_dense(blocks.front().layout.dim(), n);

  SolveStats coupling_stats;
  const CouplingSystem cs = assemble_coupling(blocks, prep.factors, options.parallelism, &coupling_stats);
  out.stats.forward_solve_columns += coupling_stats.forward_solve_columns;
  out.stats.note_dense(coupling_stats.largest_dense_entries, 1);
  out.timings.emplace_back("coupling_jacobians", clock.lap());

  // D nu = -C^{-1} sum_t Dh_t dz_t/dd_t, TK x NT.
  MatrixXd dnu = MatrixXd::Zero(T * k, n * T);
  if (k > 0) {
    for (Index t = 0; t < T; ++t) dnu.middleCols(t * n, n) = -(blocks[t].Dh * dz_dd[t]);
    dnu = cs.C.solve(dnu);
    out.stats.coupling_solves = 1;
    out.stats.note_dense(T * k, n * T);
  }
  out.timings.emplace_back("coupling_solve", clock.lap());

  // Dg_t = P_g (dz_t/dd_t E_t + dz_t/dnu D nu_t), contracted with e_t.
  std::vector<VectorXd> contrib(T);
  parallel_for(std::size_t(T), options.parallelism, [&](std::size_t t) {
    const LocalBlock& blk = blocks[t];
    MatrixXd dg = MatrixXd::Zero(n, n * T);
    dg.middleCols(Index(t) * n, n) = dz_dd[t].topRows(n);
    if (k > 0) dg += cs.dz_dnu[t].topRows(n) * dnu.middleRows(blk.nu_first * k, blk.nu_blocks() * k);
    contrib[t] = dg.transpose() * c.emissions_rate.col(Index(t));
  });
  VectorXd lambda = VectorXd::Zero(n * T);
  for (Index t = 0; t < T; ++t) lambda += contrib[t];
  out.stats.note_dense(n, n * T);
  out.timings.emplace_back("combine", clock.lap());
  out.lambda = lambda.reshaped(n, T);
  return out;
}

LmeResult lme_reverse_decentral(const DispatchCase& c, const DispatchSolution& solution,
                                const DecentralOptions& options) {
  const Index n = c.n_nodes(), k = c.n_batteries(), T = c.horizon;
  LmeResult out = make_lme_result(Method::decentral_rev, n, T);
  out.degeneracy_flag = is_degenerate(c, solution);
  detail::Stopwatch clock;
  const Prepared prep = prepare(c, solution, options, out, clock);
  const auto& blocks = prep.blocks;

  // Stage 1: d1F_t' a_t = P_g' e_t.
  std::vector<VectorXd> lam(T), w_part(T);
  parallel_for(std::size_t(T), options.parallelism, [&](std::size_t t) {
    const LocalBlock& blk = blocks[t];
    MatrixXd rhs = MatrixXd::Zero(blk.layout.dim(), 1);
    rhs.col(0).head(n) = c.emissions_rate.col(Index(t));
    const VectorXd a = prep.factors[t].solve_transpose(rhs).col(0);
    lam[t] = -(blk.dF_d.transpose() * a);
    w_part[t] = -(blk.dF_nu.transpose() * a);
  });
  VectorXd w = VectorXd::Zero(T * k);
  for (Index t = 0; t < T; ++t) w.segment(blocks[t].nu_first * k, w_part[t].size()) += w_part[t];
  out.timings.emplace_back("local_adjoint", clock.lap());
  out.stats.adjoint_solve_columns += T;
  if (T) out.stats.note_dense(blocks.back().layout.dim() + k, 1);

  if (k > 0) {
    // Stage 2.
    SolveStats coupling_stats;
    const CouplingSystem cs = assemble_coupling(blocks, prep.factors, options.parallelism, &coupling_stats);
    out.stats.forward_solve_columns += coupling_stats.forward_solve_columns;
    out.stats.note_dense(coupling_stats.largest_dense_entries, 1);
    out.timings.emplace_back("coupling_jacobians", clock.lap());

    // Stage 3.
    const VectorXd y = cs.C.solve_transpose(w);
    out.stats.coupling_solves = 1;
    out.timings.emplace_back("coupling_solve", clock.lap());

    // Stage 4: d1F_t' q_t = Dh_t' y.
    parallel_for(std::size_t(T), options.parallelism, [&](std::size_t t) {
      const LocalBlock& blk = blocks[t];
      const MatrixXd rhs = blk.Dh.transpose() * y;
      const VectorXd q = prep.factors[t].solve_transpose(rhs).col(0);
      lam[t] += blk.dF_d.transpose() * q;
    });
    out.stats.adjoint_solve_columns += T;
    out.timings.emplace_back("local_adjoint_correction", clock.lap());
  }

  for (Index t = 0; t < T; ++t) out.lambda.col(t) = lam[t];
  return out;
}

}  // namespace lmesens
