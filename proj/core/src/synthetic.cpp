#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include "lmesens/model.hpp"

namespace lmesens {

namespace {

// std::uniform_real_distribution is implementation defined; mapping the
// engine output by hand keeps generated cases identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    const double unit = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * unit;
  }

  Index below(Index n) { return static_cast<Index>(engine_() % static_cast<std::uint64_t>(n)); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace

DispatchCase generate_synthetic(Index n_nodes, Index n_batteries, Index horizon,
                                std::uint64_t seed) {
  return generate_synthetic(SyntheticOptions{n_nodes, n_batteries, horizon, seed, std::nullopt});
}

DispatchCase generate_synthetic(const SyntheticOptions& options) {
  const Index n = options.n_nodes;
  const Index k = options.n_batteries;
  const Index t_len = options.horizon;
  if (n < 1) throw DomainError("n_nodes must be at least 1");
  if (k < 0 || k > n) throw DomainError("n_batteries must lie in [0, n_nodes]");
  if (t_len < 1) throw DomainError("horizon must be at least 1");
  const Index max_lines = n * (n - 1) / 2;
  const Index n_lines = options.n_lines.value_or(n - 1 + n / 2);
  if (n_lines < n - 1 || n_lines > max_lines)
    throw DomainError("n_lines must lie in [n_nodes - 1, n_nodes (n_nodes - 1) / 2]");

  Rng rng(options.seed);
  DispatchCase c;
  Network& net = c.network;
  net.n_nodes = n;
  c.horizon = t_len;

  // Random recursive spanning tree, then distinct extra node pairs.
  std::set<std::pair<Index, Index>> used;
  auto add_line = [&](Index a, Index b) {
    net.line_from.push_back(a);
    net.line_to.push_back(b);
    used.insert({std::min(a, b), std::max(a, b)});
  };
  for (Index i = 1; i < n; ++i) add_line(rng.below(i), i);
  while (net.n_lines() < n_lines) {
    const Index a = rng.below(n);
    const Index b = rng.below(n);
    if (a == b || used.contains({std::min(a, b), std::max(a, b)})) continue;
    add_line(a, b);
  }

  // Daily load shape with node-specific scale and a little noise.
  VectorXd base_load(n);
  for (Index i = 0; i < n; ++i) base_load[i] = rng.uniform(10.0, 100.0);
  c.demand.resize(n, t_len);
  for (Index t = 0; t < t_len; ++t) {
    const double shape = 1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * (double(t % 24) - 8.0) / 24.0);
    for (Index i = 0; i < n; ++i) c.demand(i, t) = base_load[i] * shape * rng.uniform(0.95, 1.05);
  }

  // Local capacity alone covers local demand, so zero flow with idle
  // batteries is always feasible.
  c.g_max.resize(n, t_len);
  VectorXd headroom(n);
  for (Index i = 0; i < n; ++i) headroom[i] = rng.uniform(1.2, 2.0);
  for (Index t = 0; t < t_len; ++t)
    for (Index i = 0; i < n; ++i) c.g_max(i, t) = c.demand(i, t) * headroom[i] + rng.uniform(1.0, 5.0);

  // Distinct costs keep the dispatch unique.
  c.cost.resize(n, t_len);
  VectorXd base_cost(n);
  for (Index i = 0; i < n; ++i) base_cost[i] = rng.uniform(10.0, 80.0);
  for (Index t = 0; t < t_len; ++t)
    for (Index i = 0; i < n; ++i) c.cost(i, t) = base_cost[i] + rng.uniform(0.0, 8.0);

  c.emissions_rate.resize(n, t_len);
  VectorXd base_rate(n);
  for (Index i = 0; i < n; ++i) base_rate[i] = rng.uniform(0.1, 1.0);
  for (Index t = 0; t < t_len; ++t)
    for (Index i = 0; i < n; ++i) c.emissions_rate(i, t) = base_rate[i] * rng.uniform(0.9, 1.1);

  const double mean_load = base_load.mean();
  const Index m = net.n_lines();
  net.susceptance.resize(m);
  net.f_max.resize(m);
  for (Index l = 0; l < m; ++l) {
    net.susceptance[l] = rng.uniform(5.0, 20.0);
    net.f_max[l] = mean_load * rng.uniform(0.3, 1.5);
  }

  // Batteries at the highest-peak-demand nodes; ties go to the lower index.
  const VectorXd peak_by_node = c.demand.rowwise().maxCoeff();
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return peak_by_node[a] > peak_by_node[b]; });
  const double peak_total = c.demand.colwise().sum().maxCoeff();
  const double energy_each = k > 0 ? 0.10 * peak_total / double(k) : 0.0;
  net.battery_node.assign(order.begin(), order.begin() + k);
  std::sort(net.battery_node.begin(), net.battery_node.end());
  net.s_max = VectorXd::Constant(k, energy_each);
  // Power rating above the energy rating: one period can move the charge
  // across its whole range, so the power limit never binds. A binding power
  // limit lets full-power round trips start and end on the same SOC bound,
  // which leaves the SOC dual non-unique.
  net.p_max = 1.25 * net.s_max;
  net.s_init = 0.5 * net.s_max;
  net.s_final = net.s_init;
  return c;
}

}  // namespace lmesens
