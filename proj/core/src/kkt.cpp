#include "lmesens/kkt.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

namespace lmesens {

KktIndexMap::KktIndexMap(const DispatchLayout& lay) : layout_(lay) {
  const Index n = lay.n, m = lay.m, k = lay.k, t = lay.t;
  Index at = 0;
  auto add = [&](const char* name, Index size) {
    ranges_.push_back({name, at, size});
    at += size;
  };
  add("g", n * t);
  add("theta", n * t);
  add("f", m * t);
  add("p", k * t);
  add("s", k * (t + 1));
  add("dual_balance", n * t);
  add("dual_kirchhoff", m * t);
  add("dual_ref", t);
  add("dual_soc", k * t);
  add("dual_init", k);
  add("dual_final", k);
  for (const char* side : {"mu_lower_", "mu_upper_"}) {
    const std::string s(side);
    ranges_.push_back({s + "g", at, n * t});
    at += n * t;
    ranges_.push_back({s + "f", at, m * t});
    at += m * t;
    ranges_.push_back({s + "p", at, k * t});
    at += k * t;
    ranges_.push_back({s + "s", at, k * (t + 1)});
    at += k * (t + 1);
  }
  dim_ = at;
}

const KktRange& KktIndexMap::operator[](std::string_view name) const {
  for (const auto& r : ranges_)
    if (r.name == name) return r;
  throw DomainError("unknown KKT block " + std::string(name));
}

Index KktIndexMap::n_bounded() const {
  return (layout_.n + layout_.m + layout_.k) * layout_.t + layout_.k * (layout_.t + 1);
}

Index kkt_dimension(Index n, Index m, Index k, Index t) { return t * (5 * n + 4 * m + 7 * k + 1) + 5 * k; }

Index reference_kkt_dimension(Index n, Index m, Index k, Index t) {
  return t * (4 * n + 4 * m + 7 * k + 1) + 3 * k;
}

namespace {

std::vector<Index> bounded_variables(const BoxQp& qp) {
  std::vector<Index> out;
  for (Index i = 0; i < qp.n_vars(); ++i)
    if (std::isfinite(qp.lower[i]) || std::isfinite(qp.upper[i])) out.push_back(i);
  return out;
}

KktPoint split(const BoxQp& qp, const VectorXd& z) {
  KktPoint pt;
  pt.bounded = bounded_variables(qp);
  const Index nx = qp.n_vars();
  const Index ny = qp.n_eqs();
  const Index nb = static_cast<Index>(pt.bounded.size());
  if (z.size() != nx + ny + 2 * nb)
    throw DimensionError("KKT point has " + std::to_string(z.size()) + " entries, expected " +
                         std::to_string(nx + ny + 2 * nb));
  pt.x = z.head(nx);
  pt.y = z.segment(nx, ny);
  pt.mu_lower = z.segment(nx + ny, nb);
  pt.mu_upper = z.segment(nx + ny + nb, nb);
  pt.slack_lower.resize(nb);
  pt.slack_upper.resize(nb);
  for (Index j = 0; j < nb; ++j) {
    const Index v = pt.bounded[j];
    pt.slack_lower[j] = pt.x[v] - qp.lower[v];
    pt.slack_upper[j] = qp.upper[v] - pt.x[v];
  }
  return pt;
}

}  // namespace

VectorXd pack_kkt_point(const DispatchCase& c, const DispatchSolution& s) {
  const KktIndexMap map{DispatchLayout(c)};
  VectorXd z(map.dim());
  const VectorXd x = pack_primal(s);
  const VectorXd y = pack_equality_duals(s);
  if (x.size() != map.dual_offset() || y.size() != map.mu_lower_offset() - map.dual_offset())
    throw DimensionError("solution does not match the case dimensions");
  const Index mult_size = s.mult_lower.g.size() + s.mult_lower.f.size() + s.mult_lower.p.size() +
                          s.mult_lower.s.size();
  if (mult_size != map.n_bounded()) throw DimensionError("bound multipliers do not match the case");
  z << x, y, s.mult_lower.g.reshaped(), s.mult_lower.f.reshaped(), s.mult_lower.p.reshaped(),
      s.mult_lower.s.reshaped(), s.mult_upper.g.reshaped(), s.mult_upper.f.reshaped(),
      s.mult_upper.p.reshaped(), s.mult_upper.s.reshaped();
  return z;
}

KktPoint split_kkt_point(const DispatchCase& c, const VectorXd& z) {
  return split(build_dispatch_qp(c, 0.0), z);
}

VectorXd kkt_map(const DispatchCase& c, const VectorXd& z, double reg_eps) {
  const BoxQp qp = build_dispatch_qp(c, reg_eps);
  const KktPoint pt = split(qp, z);
  const Index nx = qp.n_vars();
  const Index ny = qp.n_eqs();
  const Index nb = static_cast<Index>(pt.bounded.size());

  VectorXd f(z.size());
  VectorXd stat = qp.hessian.cwiseProduct(pt.x) + qp.linear + qp.eq_matrix.transpose() * pt.y;
  for (Index j = 0; j < nb; ++j) stat[pt.bounded[j]] += pt.mu_upper[j] - pt.mu_lower[j];
  f.head(nx) = stat;
  f.segment(nx, ny) = qp.eq_matrix * pt.x - qp.eq_rhs;
  f.segment(nx + ny, nb) = pt.mu_lower.cwiseProduct(pt.slack_lower);
  f.segment(nx + ny + nb, nb) = pt.mu_upper.cwiseProduct(pt.slack_upper);
  return f;
}

KktSystem assemble_kkt(const DispatchCase& c, const DispatchSolution& solution, double reg_eps) {
  const DispatchLayout lay(c);
  KktIndexMap map(lay);
  const BoxQp qp = build_dispatch_qp(c, reg_eps);
  const KktPoint pt = split(qp, pack_kkt_point(c, solution));
  const Index nx = qp.n_vars();
  const Index ny = qp.n_eqs();
  const Index nb = static_cast<Index>(pt.bounded.size());
  const Index lo = nx + ny;
  const Index hi = lo + nb;
  const Index dim = hi + nb;
  if (dim != kkt_dimension(lay.n, lay.m, lay.k, lay.t) || dim != map.dim())
    throw DimensionError("assembled KKT dimension " + std::to_string(dim) + " does not match layout");

  std::vector<Eigen::Triplet<double>> e;
  e.reserve(nx + 2 * qp.eq_matrix.nonZeros() + 6 * nb);
  for (Index i = 0; i < nx; ++i) e.emplace_back(i, i, qp.hessian[i]);
  for (Index j = 0; j < qp.eq_matrix.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(qp.eq_matrix, j); it; ++it) {
      e.emplace_back(j, nx + it.row(), it.value());  // A' in the stationarity rows
      e.emplace_back(nx + it.row(), j, it.value());  // A in the equality rows
    }
  }
  for (Index b = 0; b < nb; ++b) {
    const Index v = pt.bounded[b];
    e.emplace_back(v, lo + b, -1.0);
    e.emplace_back(v, hi + b, 1.0);
    e.emplace_back(lo + b, v, pt.mu_lower[b]);
    e.emplace_back(lo + b, lo + b, pt.slack_lower[b]);
    e.emplace_back(hi + b, v, -pt.mu_upper[b]);
    e.emplace_back(hi + b, hi + b, pt.slack_upper[b]);
  }

  KktSystem sys{SparseMatrix(dim, dim), SparseMatrix(dim, lay.n * lay.t), std::move(map), dim};
  sys.d1F.setFromTriplets(e.begin(), e.end());
  sys.d1F.makeCompressed();

  std::vector<Eigen::Triplet<double>> d;
  d.reserve(lay.n * lay.t);
  for (Index t = 0; t < lay.t; ++t)
    for (Index i = 0; i < lay.n; ++i) d.emplace_back(nx + lay.balance(i, t), i + lay.n * t, -1.0);
  sys.d2F.setFromTriplets(d.begin(), d.end());
  sys.d2F.makeCompressed();
  return sys;
}

void write_coordinate(std::ostream& out, const SparseMatrix& matrix) {
  out << std::setprecision(17);
  for (Index j = 0; j < matrix.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(matrix, j); it; ++it)
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

}  // namespace lmesens
