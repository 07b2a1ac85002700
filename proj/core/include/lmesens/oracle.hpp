#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "lmesens/dispatch.hpp"
#include "lmesens/lme.hpp"

namespace lmesens {

/// sum_{n,t} e_nt g_nt.
double total_emissions(const DispatchCase& c, const DispatchSolution& solution);

struct FiniteDifferenceOptions {
  double step = 1e-4;  // relative: h = step * max(1, |d_nt|)
  double reg_eps = 1e-6;
  double tol = 1e-8;
  std::size_t parallelism = 1;
  // One-sided differences disagreeing by more than this fraction of
  // max(|central|, 1e-2) mark the entry degenerate.
  double kink_tolerance = 1e-3;
  // (node, period) pairs to evaluate; all entries when unset. Skipped
  // entries are reported through LmeResult::evaluated.
  std::optional<std::vector<std::pair<Index, Index>>> entries;
};

/// Central differences of total emissions, one pair of dispatch re-solves
/// per entry. Throws InfeasibleError if a perturbed problem is infeasible.
LmeResult lme_finite_difference(const DispatchCase& c, const FiniteDifferenceOptions& options = {});
LmeResult lme_finite_difference(const DispatchCase& c, double step, double reg_eps, double tol);

struct LmeComparison {
  double max_abs_diff = 0.0;
  double max_rel_diff = 0.0;
  Index worst_node = -1;  // location of max_abs_diff
  Index worst_period = -1;
  Index compared = 0;  // entries evaluated in both and degenerate in neither
};

/// Relative differences use max(1e-9, |a|, |b|) as the denominator.
LmeComparison compare_lme(const LmeResult& a, const LmeResult& b);

}  // namespace lmesens
