#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lmesens/model.hpp"

namespace lmesens {

enum class Method { central_fwd, central_rev, decentral_fwd, decentral_rev, finite_diff };

/// "central-fwd", "central-rev", "decentral-fwd", "decentral-rev", "finite-diff".
std::string_view method_name(Method method);
/// Inverse of method_name; also accepts underscores. Throws DomainError.
Method parse_method(std::string_view name);

/// Work counters filled in by the differentiation routines.
struct SolveStats {
  long factorizations = 0;
  long forward_solve_columns = 0;  // right-hand sides solved with A
  long adjoint_solve_columns = 0;  // right-hand sides solved with A'
  long coupling_solves = 0;        // solves with the period coupling system
  // Largest dense intermediate (rows x cols) allocated by the method.
  Index largest_dense_entries = 0;

  void note_dense(Index rows, Index cols) {
    largest_dense_entries = std::max(largest_dense_entries, rows * cols);
  }
};

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct LmeResult {
  MatrixXd lambda;  // N x T, tCO2/MWh
  Method method = Method::central_rev;
  // Stage name -> seconds, in execution order. Stages whose name starts
  // with "assemble" build matrices; every other stage is linear algebra.
  std::vector<std::pair<std::string, double>> timings;
  bool degeneracy_flag = false;
  BoolMatrix degenerate_entries;  // N x T; only the finite difference oracle sets entries
  BoolMatrix evaluated;           // N x T; false where the oracle skipped an entry
  SolveStats stats;

  /// Sum of all non-assembly stages.
  double linear_solve_seconds() const;
  double stage_seconds(std::string_view stage) const;
};

/// Result skeleton with lambda zeroed and every entry marked evaluated.
LmeResult make_lme_result(Method method, Index n_nodes, Index horizon);

}  // namespace lmesens
