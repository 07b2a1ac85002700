#pragma once

#include <vector>

#include "lmesens/model.hpp"

namespace lmesens {

/// Square matrix made of n_blocks x n_blocks blocks of size b x b where
/// only the diagonal and the two neighbouring block diagonals are nonzero.
///
///   diag[i]  = block (i, i)
///   lower[i] = block (i, i-1), i >= 1   (lower[0] is unused and empty)
///   upper[i] = block (i, i+1), i < n-1  (upper[n-1] is unused and empty)
class BlockTridiagonal {
 public:
  BlockTridiagonal() = default;
  BlockTridiagonal(Index n_blocks, Index block_size);

  Index n_blocks() const { return static_cast<Index>(diag_.size()); }
  Index block_size() const { return block_; }
  Index rows() const { return n_blocks() * block_; }

  MatrixXd& diag(Index i) { return diag_[i]; }
  MatrixXd& lower(Index i) { return lower_[i]; }
  MatrixXd& upper(Index i) { return upper_[i]; }
  const MatrixXd& diag(Index i) const { return diag_[i]; }
  const MatrixXd& lower(Index i) const { return lower_[i]; }
  const MatrixXd& upper(Index i) const { return upper_[i]; }

  /// Block (i, j); zero when |i - j| > 1.
  MatrixXd block(Index i, Index j) const;
  MatrixXd to_dense() const;
  BlockTridiagonal transpose() const;
  MatrixXd multiply(const MatrixXd& x) const;

  /// Block Thomas elimination with partial-pivoted LU on each pivot block.
  /// Throws DegenerateError (carrying the block index) when a pivot block
  /// has reciprocal condition below 1e-14.
  MatrixXd solve(const MatrixXd& rhs) const;
  MatrixXd solve_transpose(const MatrixXd& rhs) const { return transpose().solve(rhs); }

 private:
  Index block_ = 0;
  std::vector<MatrixXd> diag_, lower_, upper_;
};

}  // namespace lmesens
