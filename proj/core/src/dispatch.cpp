#include "lmesens/dispatch.hpp"

#include <cmath>
#include <limits>

#include "lmesens/kkt.hpp"

namespace lmesens {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Quick necessary condition: each period's demand must be coverable by
// generation plus full battery discharge.
void check_capacity(const DispatchCase& c) {
  const double battery_power = c.network.p_max.sum();
  for (Index t = 0; t < c.horizon; ++t) {
    const double need = c.demand.col(t).sum();
    const double have = c.g_max.col(t).sum() + battery_power;
    if (need > have) {
      throw InfeasibleError("period " + std::to_string(t + 1) + " demand " + std::to_string(need) +
                            " MW exceeds total generation and storage capacity " +
                            std::to_string(have) + " MW");
    }
  }
}

}  // namespace

BoxQp build_dispatch_qp(const DispatchCase& c, double reg_eps) {
  const DispatchLayout lay(c);
  const Network& net = c.network;
  const Index nx = lay.n_primal();
  const Index nr = lay.n_rows();

  BoxQp qp;
  qp.hessian = VectorXd::Constant(nx, reg_eps);
  qp.linear = VectorXd::Zero(nx);
  qp.lower = VectorXd::Constant(nx, -kInf);
  qp.upper = VectorXd::Constant(nx, kInf);
  qp.eq_rhs = VectorXd::Zero(nr);

  std::vector<Eigen::Triplet<double>> a;
  a.reserve(std::size_t(lay.t) * std::size_t(2 * lay.n + 5 * lay.m + 4 * lay.k + 1) + 2 * lay.k);
  for (Index t = 0; t < lay.t; ++t) {
    for (Index i = 0; i < lay.n; ++i) {
      const Index g = lay.g(i, t);
      qp.linear[g] = c.cost(i, t);
      qp.lower[g] = 0.0;
      qp.upper[g] = c.g_max(i, t);
      a.emplace_back(lay.balance(i, t), g, 1.0);
      qp.eq_rhs[lay.balance(i, t)] = c.demand(i, t);
    }
    for (Index l = 0; l < lay.m; ++l) {
      const Index f = lay.f(l, t);
      qp.lower[f] = -net.f_max[l];
      qp.upper[f] = net.f_max[l];
      a.emplace_back(lay.balance(net.line_from[l], t), f, -1.0);
      a.emplace_back(lay.balance(net.line_to[l], t), f, 1.0);
      const Index row = lay.kirchhoff(l, t);
      a.emplace_back(row, f, 1.0);
      a.emplace_back(row, lay.theta(net.line_from[l], t), -net.susceptance[l]);
      a.emplace_back(row, lay.theta(net.line_to[l], t), net.susceptance[l]);
    }
    a.emplace_back(lay.reference(t), lay.theta(0, t), 1.0);
    for (Index b = 0; b < lay.k; ++b) {
      const Index p = lay.p(b, t);
      qp.lower[p] = -net.p_max[b];
      qp.upper[p] = net.p_max[b];
      a.emplace_back(lay.balance(net.battery_node[b], t), p, 1.0);
      const Index row = lay.soc(b, t);
      a.emplace_back(row, lay.s(b, t + 1), 1.0);
      a.emplace_back(row, lay.s(b, t), -1.0);
      a.emplace_back(row, p, 1.0);
    }
  }
  for (Index b = 0; b < lay.k; ++b) {
    for (Index t = 0; t <= lay.t; ++t) {
      qp.lower[lay.s(b, t)] = 0.0;
      qp.upper[lay.s(b, t)] = net.s_max[b];
    }
    a.emplace_back(lay.init(b), lay.s(b, 0), 1.0);
    qp.eq_rhs[lay.init(b)] = net.s_init[b];
    a.emplace_back(lay.final_row(b), lay.s(b, lay.t), 1.0);
    qp.eq_rhs[lay.final_row(b)] = net.s_final[b];
  }
  qp.eq_matrix.resize(nr, nx);
  qp.eq_matrix.setFromTriplets(a.begin(), a.end());
  qp.eq_matrix.makeCompressed();
  return qp;
}

DispatchSolution solve_dispatch(const DispatchCase& c, double reg_eps, double tol) {
  return solve_dispatch(c, DispatchOptions{reg_eps, tol, 200});
}

DispatchSolution solve_dispatch(const DispatchCase& c, const DispatchOptions& options) {
  if (!(options.reg_eps > 0.0)) throw DomainError("reg_eps must be positive");
  if (!(options.tol > 0.0)) throw DomainError("tol must be positive");
  auto violations = validate_case(c);
  // Perturbed demand may go slightly negative inside finite differences;
  // everything else must hold.
  std::erase_if(violations, [](const Violation& v) { return v.code == "negative_demand"; });
  if (!violations.empty()) throw ValidationError(std::move(violations));
  check_capacity(c);

  const DispatchLayout lay(c);
  BoxQp qp = build_dispatch_qp(c, options.reg_eps);
  // s(0) and s(T) are pinned by the init/final rows to values inside their
  // boxes, so those boxes are inactive and are left out of the iteration.
  // Their multipliers are zero.
  for (Index b = 0; b < lay.k; ++b) {
    for (Index t : {Index{0}, lay.t}) {
      qp.lower[lay.s(b, t)] = -kInf;
      qp.upper[lay.s(b, t)] = kInf;
    }
  }

  // Solve slightly tighter than requested so the residual of the full KKT
  // map, re-evaluated below, stays within tol.
  const BoxQpSolution qs = solve_box_qp(qp, BoxQpOptions{0.5 * options.tol, options.max_iterations});

  DispatchSolution sol;
  auto take = [&](Index offset, Index rows, Index cols, const VectorXd& v) {
    return MatrixXd(Eigen::Map<const MatrixXd>(v.data() + offset, rows, cols));
  };
  sol.g = take(lay.g(0, 0), lay.n, lay.t, qs.x);
  sol.theta = take(lay.theta(0, 0), lay.n, lay.t, qs.x);
  sol.f = take(lay.f(0, 0), lay.m, lay.t, qs.x);
  sol.p = take(lay.p(0, 0), lay.k, lay.t, qs.x);
  sol.s = take(lay.s(0, 0), lay.k, lay.t + 1, qs.x);
  sol.dual_balance = take(lay.balance(0, 0), lay.n, lay.t, qs.y);
  sol.dual_kirchhoff = take(lay.kirchhoff(0, 0), lay.m, lay.t, qs.y);
  sol.dual_ref = qs.y.segment(lay.reference(0), lay.t);
  sol.dual_soc = take(lay.soc(0, 0), lay.k, lay.t, qs.y);
  sol.dual_init = qs.y.segment(lay.init(0), lay.k);
  sol.dual_final = qs.y.segment(lay.final_row(0), lay.k);
  for (auto [mult, z] : {std::pair{&sol.mult_lower, &qs.z_lower}, std::pair{&sol.mult_upper, &qs.z_upper}}) {
    mult->g = take(lay.g(0, 0), lay.n, lay.t, *z);
    mult->f = take(lay.f(0, 0), lay.m, lay.t, *z);
    mult->p = take(lay.p(0, 0), lay.k, lay.t, *z);
    mult->s = take(lay.s(0, 0), lay.k, lay.t + 1, *z);
  }
  sol.iterations = qs.iterations;
  sol.objective_value = c.cost.cwiseProduct(sol.g).sum() + 0.5 * options.reg_eps * qs.x.squaredNorm();
  sol.kkt_residual_norm = kkt_residual(c, sol, options.reg_eps);
  if (!(sol.kkt_residual_norm <= options.tol)) {
    throw InfeasibleError("KKT residual " + std::to_string(sol.kkt_residual_norm) +
                          " above tolerance after convergence");
  }
  return sol;
}

VectorXd pack_primal(const DispatchSolution& s) {
  VectorXd x(s.g.size() + s.theta.size() + s.f.size() + s.p.size() + s.s.size());
  x << s.g.reshaped(), s.theta.reshaped(), s.f.reshaped(), s.p.reshaped(), s.s.reshaped();
  return x;
}

VectorXd pack_equality_duals(const DispatchSolution& s) {
  VectorXd y(s.dual_balance.size() + s.dual_kirchhoff.size() + s.dual_ref.size() +
             s.dual_soc.size() + s.dual_init.size() + s.dual_final.size());
  y << s.dual_balance.reshaped(), s.dual_kirchhoff.reshaped(), s.dual_ref, s.dual_soc.reshaped(),
      s.dual_init, s.dual_final;
  return y;
}

double kkt_residual(const DispatchCase& c, const DispatchSolution& solution, double reg_eps) {
  const VectorXd f = kkt_map(c, pack_kkt_point(c, solution), reg_eps);
  return f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
}

bool is_degenerate(const DispatchCase& c, const DispatchSolution& solution, double threshold) {
  const KktPoint pt = split_kkt_point(c, pack_kkt_point(c, solution));
  for (Index j = 0; j < pt.bounded.size(); ++j) {
    if (pt.mu_lower[j] < threshold && pt.slack_lower[j] < threshold) return true;
    if (pt.mu_upper[j] < threshold && pt.slack_upper[j] < threshold) return true;
  }
  return false;
}

}  // namespace lmesens
