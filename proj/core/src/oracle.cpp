#include "lmesens/oracle.hpp"

#include <cmath>

#include "lmesens/parallel.hpp"
#include "stopwatch.hpp"

namespace lmesens {

double total_emissions(const DispatchCase& c, const DispatchSolution& solution) {
  if (solution.g.rows() != c.emissions_rate.rows() || solution.g.cols() != c.emissions_rate.cols())
    throw DimensionError("generation and emission rates differ in shape");
  return c.emissions_rate.cwiseProduct(solution.g).sum();
}

LmeResult lme_finite_difference(const DispatchCase& c, const FiniteDifferenceOptions& options) {
  if (!(options.step > 0.0)) throw DomainError("finite difference step must be positive");
  require_valid(c);
  const Index n = c.n_nodes();
  const Index T = c.horizon;
  LmeResult out = make_lme_result(Method::finite_diff, n, T);

  std::vector<std::pair<Index, Index>> entries;
  if (options.entries) {
    entries = *options.entries;
    out.evaluated.setConstant(false);
    for (auto [i, t] : entries) {
      if (i < 0 || i >= n || t < 0 || t >= T) throw DomainError("finite difference entry out of range");
      out.evaluated(i, t) = true;
    }
  } else {
    for (Index t = 0; t < T; ++t)
      for (Index i = 0; i < n; ++i) entries.emplace_back(i, t);
  }

  const DispatchOptions solve{options.reg_eps, options.tol, 200};
  detail::Stopwatch clock;
  const double h0 = total_emissions(c, solve_dispatch(c, solve));
  std::vector<double> value(entries.size());
  std::vector<char> kink(entries.size(), 0);
  parallel_for(entries.size(), options.parallelism, [&](std::size_t j) {
    const auto [i, t] = entries[j];
    const double h = options.step * std::max(1.0, std::abs(c.demand(i, t)));
    DispatchCase shifted = c;
    shifted.demand(i, t) = c.demand(i, t) + h;
    const double up = total_emissions(shifted, solve_dispatch(shifted, solve));
    shifted.demand(i, t) = c.demand(i, t) - h;
    const double down = total_emissions(shifted, solve_dispatch(shifted, solve));
    const double central = (up - down) / (2.0 * h);
    const double forward = (up - h0) / h;
    const double backward = (h0 - down) / h;
    value[j] = central;
    kink[j] = std::abs(forward - backward) > options.kink_tolerance * std::max(std::abs(central), 1e-2);
  });
  out.timings.emplace_back("perturbed_solves", clock.lap());

  for (std::size_t j = 0; j < entries.size(); ++j) {
    const auto [i, t] = entries[j];
    out.lambda(i, t) = value[j];
    out.degenerate_entries(i, t) = kink[j] != 0;
    out.degeneracy_flag = out.degeneracy_flag || kink[j];
  }
  return out;
}

LmeResult lme_finite_difference(const DispatchCase& c, double step, double reg_eps, double tol) {
  FiniteDifferenceOptions options;
  options.step = step;
  options.reg_eps = reg_eps;
  options.tol = tol;
  return lme_finite_difference(c, options);
}

LmeComparison compare_lme(const LmeResult& a, const LmeResult& b) {
  if (a.lambda.rows() != b.lambda.rows() || a.lambda.cols() != b.lambda.cols())
    throw DimensionError("LME results differ in shape");
  auto flag = [](const BoolMatrix& m, Index i, Index t, bool fallback) {
    return m.size() ? m(i, t) : fallback;
  };
  LmeComparison r;
  for (Index t = 0; t < a.lambda.cols(); ++t) {
    for (Index i = 0; i < a.lambda.rows(); ++i) {
      if (!flag(a.evaluated, i, t, true) || !flag(b.evaluated, i, t, true)) continue;
      if (flag(a.degenerate_entries, i, t, false) || flag(b.degenerate_entries, i, t, false)) continue;
      const double x = a.lambda(i, t);
      const double y = b.lambda(i, t);
      const double diff = std::abs(x - y);
      const double rel = diff / std::max({1e-9, std::abs(x), std::abs(y)});
      ++r.compared;
      if (diff > r.max_abs_diff || r.worst_node < 0) {
        r.max_abs_diff = diff;
        r.worst_node = i;
        r.worst_period = t;
      }
      r.max_rel_diff = std::max(r.max_rel_diff, rel);
    }
  }
  return r;
}

}  // namespace lmesens
