#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "lmesens/dispatch.hpp"

namespace lmesens {

/// Named contiguous block of the stacked KKT vector.
struct KktRange {
  std::string name;
  Index offset = 0;
  Index size = 0;

  Index end() const { return offset + size; }
};

/// Row/column layout of the KKT system. Rows and columns share the layout:
/// row i is the KKT condition paired with variable i.
///
///   g, theta, f, p, s                     stationarity / primal variables
///   dual_balance ... dual_final           equality rows / their duals
///   mu_lower_{g,f,p,s}, mu_upper_{g,f,p,s} complementarity / box multipliers
class KktIndexMap {
 public:
  explicit KktIndexMap(const DispatchLayout& layout);

  const KktRange& operator[](std::string_view name) const;
  const std::vector<KktRange>& ranges() const { return ranges_; }
  Index dim() const { return dim_; }

  const DispatchLayout& layout() const { return layout_; }
  Index primal_offset() const { return 0; }
  Index dual_offset() const { return layout_.n_primal(); }
  Index mu_lower_offset() const { return layout_.n_primal() + layout_.n_rows(); }
  Index mu_upper_offset() const { return mu_lower_offset() + n_bounded(); }
  Index n_bounded() const;

 private:
  DispatchLayout layout_;
  std::vector<KktRange> ranges_;
  Index dim_ = 0;
};

/// KKT dimension T(5N + 4M + 7K + 1) + 5K.
Index kkt_dimension(Index n, Index m, Index k, Index t);

/// Alternative published count, T(4N + 4M + 7K + 1) + 3K.
/// Kept for reference; the assembled system uses kkt_dimension.
Index reference_kkt_dimension(Index n, Index m, Index k, Index t);

/// z split into its parts, with bound slacks evaluated.
struct KktPoint {
  VectorXd x, y, mu_lower, mu_upper;
  std::vector<Index> bounded;  // primal index of each boxed variable
  VectorXd slack_lower, slack_upper;
};

VectorXd pack_kkt_point(const DispatchCase& c, const DispatchSolution& solution);
KktPoint split_kkt_point(const DispatchCase& c, const VectorXd& z);

/// F(z, d) with d taken from c.demand:
///   [ H x + q + A'y - P'mu_l + P'mu_u ;  A x - b ;
///     mu_l .* (P x - lower) ;  mu_u .* (upper - P x) ]
VectorXd kkt_map(const DispatchCase& c, const VectorXd& z, double reg_eps);

struct KktSystem {
  SparseMatrix d1F;  // L x L, dF/dz
  SparseMatrix d2F;  // L x NT, dF/dd: -1 at (balance(n,t), n + N t)
  KktIndexMap index_map;
  Index dim_l = 0;
};

/// Jacobians of the KKT map at the solution. Complementarity rows are
/// differentiated in product form.
KktSystem assemble_kkt(const DispatchCase& c, const DispatchSolution& solution, double reg_eps);

/// Writes `matrix` as "row col value" lines (0-based), one nonzero per line.
void write_coordinate(std::ostream& out, const SparseMatrix& matrix);

}  // namespace lmesens
