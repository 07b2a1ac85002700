#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "lmesens/errors.hpp"

namespace lmesens {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Static grid topology and storage data.
///
/// Nodes, lines and batteries are 0-based in memory. The case file uses
/// 1-based node numbers (see case_io).
struct Network {
  Index n_nodes = 0;

  // Line m runs from line_from[m] to line_to[m]; the incidence matrix has +1
  // at the "from" node and -1 at the "to" node.
  std::vector<Index> line_from;
  std::vector<Index> line_to;
  VectorXd susceptance;  // per unit, > 0
  VectorXd f_max;        // MW

  std::vector<Index> battery_node;
  VectorXd p_max;    // MW
  VectorXd s_max;    // MWh
  VectorXd s_init;   // MWh
  VectorXd s_final;  // MWh

  Index n_lines() const { return static_cast<Index>(line_from.size()); }
  Index n_batteries() const { return static_cast<Index>(battery_node.size()); }

  /// Node-branch incidence A (N x M).
  SparseMatrix line_incidence() const;
  /// Node-battery incidence B (N x K).
  SparseMatrix battery_incidence() const;

  bool operator==(const Network&) const;
};

/// A network plus the time series of one dispatch horizon. All matrices are
/// N x T, column t holding period t.
struct DispatchCase {
  Network network;
  Index horizon = 0;
  MatrixXd cost;            // $/MWh
  MatrixXd demand;          // MW
  MatrixXd g_max;           // MW
  MatrixXd emissions_rate;  // tCO2/MWh

  Index n_nodes() const { return network.n_nodes; }
  Index n_lines() const { return network.n_lines(); }
  Index n_batteries() const { return network.n_batteries(); }

  bool operator==(const DispatchCase&) const;
};

/// Every invariant violation of the case; empty when the case is valid.
std::vector<Violation> validate_case(const DispatchCase& dispatch_case);

/// Throws ValidationError when validate_case reports anything.
void require_valid(const DispatchCase& dispatch_case);

/// Parses a case document. Throws ParseError on malformed input and
/// ValidationError when the parsed case breaks an invariant.
DispatchCase parse_case(const std::string& text);
std::string serialize_case(const DispatchCase& dispatch_case);

DispatchCase load_case(const std::filesystem::path& path);
void save_case(const DispatchCase& dispatch_case, const std::filesystem::path& path);

struct SyntheticOptions {
  Index n_nodes = 1;
  Index n_batteries = 0;
  Index horizon = 1;
  std::uint64_t seed = 0;
  // Total line count, spanning tree included. Defaults to N - 1 + N / 2.
  std::optional<Index> n_lines;
};

/// Random connected case that is feasible by construction.
///
/// Every node can serve its own demand (g_max >= 1.2 d elementwise), the
/// batteries sit on the highest-peak-demand nodes and hold 10% of the peak
/// total demand as energy, and s_init = s_final = s_max / 2.
DispatchCase generate_synthetic(const SyntheticOptions& options);
DispatchCase generate_synthetic(Index n_nodes, Index n_batteries, Index horizon,
                                std::uint64_t seed);

/// True when every node is reachable from node 0 through the lines.
bool is_connected(const Network& network);

}  // namespace lmesens
