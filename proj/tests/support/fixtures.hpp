#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lmesens/central.hpp"
#include "lmesens/decentral.hpp"
#include "lmesens/oracle.hpp"

namespace lmesens::testing {

inline std::filesystem::path data_dir() { return LMESENS_DATA_DIR; }
inline std::filesystem::path case2b_path() { return data_dir() / "case2b.json"; }
inline DispatchCase case2b() { return load_case(case2b_path()); }

/// One node, one generator, no lines, no batteries.
inline DispatchCase trivial_case(double demand = 5.0, double g_max = 10.0, double cost = 1.0,
                                 double rate = 2.0) {
  DispatchCase c;
  c.network.n_nodes = 1;
  c.network.susceptance.resize(0);
  c.network.f_max.resize(0);
  c.network.p_max.resize(0);
  c.network.s_max.resize(0);
  c.network.s_init.resize(0);
  c.network.s_final.resize(0);
  c.horizon = 1;
  c.cost = MatrixXd::Constant(1, 1, cost);
  c.demand = MatrixXd::Constant(1, 1, demand);
  c.g_max = MatrixXd::Constant(1, 1, g_max);
  c.emissions_rate = MatrixXd::Constant(1, 1, rate);
  return c;
}

/// A solved case with its KKT system, as every differentiation test needs.
struct Solved {
  DispatchCase c;
  DispatchSolution sol;
  KktSystem kkt;
  std::uint64_t seed = 0;
};

inline Solved solve_case(DispatchCase c, double reg_eps = 1e-6, double tol = 1e-8) {
  DispatchSolution sol = solve_dispatch(c, reg_eps, tol);
  KktSystem kkt = assemble_kkt(c, sol, reg_eps);
  return Solved{std::move(c), std::move(sol), std::move(kkt), 0};
}

struct CorpusLimits {
  Index min_nodes = 5, max_nodes = 50;
  Index max_batteries = 5;
  Index min_horizon = 2, max_horizon = 48;
};

/// Seeded random cases that solve, are strictly complementary and give a
/// nonsingular coupling system. Seeds that fail any of these are skipped and
/// replaced by the next one; `rejected` counts them.
inline std::vector<Solved> make_corpus(std::size_t count, const CorpusLimits& lim, std::uint64_t first_seed,
                                       std::size_t* rejected = nullptr) {
  std::vector<Solved> out;
  std::size_t skipped = 0;
  for (std::uint64_t seed = first_seed; out.size() < count; ++seed) {
    std::mt19937_64 rng(seed);
    auto pick = [&](Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); };
    SyntheticOptions opt;
    opt.n_nodes = pick(lim.min_nodes, lim.max_nodes);
    const Index max_lines = std::min(2 * opt.n_nodes, opt.n_nodes * (opt.n_nodes - 1) / 2);
    opt.n_lines = pick(opt.n_nodes - 1, std::max(opt.n_nodes - 1, max_lines));
    opt.n_batteries = pick(0, std::min(lim.max_batteries, opt.n_nodes));
    opt.horizon = pick(lim.min_horizon, lim.max_horizon);
    opt.seed = seed;
    try {
      Solved s = solve_case(generate_synthetic(opt));
      if (is_degenerate(s.c, s.sol)) throw DegenerateError("weakly active bound");
      if (s.c.n_batteries() > 0) {
        const auto blocks = build_local_blocks(s.c, s.sol, s.kkt, extract_coupling_duals(s.sol));
        const CouplingSystem coupling = assemble_coupling(blocks, 1);
        coupling.C.solve(MatrixXd::Zero(coupling.C.rows(), 1));
      }
      s.seed = seed;
      out.push_back(std::move(s));
    } catch (const Error&) {
      ++skipped;
    }
  }
  if (rejected) *rejected = skipped;
  return out;
}

/// At most `max_entries` evenly spaced (node, period) pairs, so FD checks on
/// larger cases stay affordable while still touching every part of the horizon.
inline std::vector<std::pair<Index, Index>> sample_entries(const DispatchCase& c, std::size_t max_entries) {
  std::vector<std::pair<Index, Index>> all;
  for (Index t = 0; t < c.horizon; ++t)
    for (Index i = 0; i < c.n_nodes(); ++i) all.emplace_back(i, t);
  if (all.size() <= max_entries) return all;
  std::vector<std::pair<Index, Index>> picked;
  const double stride = double(all.size()) / double(max_entries);
  for (std::size_t j = 0; j < max_entries; ++j) picked.push_back(all[std::size_t(j * stride)]);
  return picked;
}

}  // namespace lmesens::testing
