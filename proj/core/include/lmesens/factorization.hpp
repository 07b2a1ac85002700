#pragma once

#include <Eigen/SparseLU>
#include <memory>

#include "lmesens/model.hpp"

namespace lmesens {

/// Sparse LU factorization of a square matrix, reusable for any number of
/// right-hand sides and for transposed solves.
///
/// Immutable once built; concurrent solves from several threads are safe
/// because each call allocates its own workspace. Every solve is refined
/// until ||A x - rhs||_inf <= 1e-9 (1 + ||rhs||_inf) per column.
class SparseFactorization {
 public:
  /// Throws DegenerateError when the matrix is structurally or numerically
  /// singular; `period` is attached to the error.
  explicit SparseFactorization(const SparseMatrix& matrix, long period = -1);
  ~SparseFactorization();
  SparseFactorization(SparseFactorization&&) noexcept;
  SparseFactorization& operator=(SparseFactorization&&) noexcept;

  MatrixXd solve(const MatrixXd& rhs) const;
  MatrixXd solve_transpose(const MatrixXd& rhs) const;

  Index size() const { return matrix_.rows(); }

 private:
  using Lu = Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>;

  MatrixXd refine(const MatrixXd& rhs, MatrixXd x, bool transpose) const;

  SparseMatrix matrix_;
  std::unique_ptr<Lu> lu_;
  long period_ = -1;
};

}  // namespace lmesens
