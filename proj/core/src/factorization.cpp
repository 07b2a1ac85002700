#include "lmesens/factorization.hpp"

#include <Eigen/SparseLU>

namespace lmesens {

namespace {

constexpr double kResidualContract = 1e-9;
constexpr int kMaxRefinements = 3;

}  // namespace

SparseFactorization::SparseFactorization(const SparseMatrix& matrix, long period)
    : matrix_(matrix), lu_(std::make_unique<Lu>()), period_(period) {
  if (matrix.rows() != matrix.cols()) throw DimensionError("factorization needs a square matrix");
  if (matrix_.rows() == 0) return;
  matrix_.makeCompressed();
  lu_->analyzePattern(matrix_);
  lu_->factorize(matrix_);
  if (lu_->info() != Eigen::Success) {
    throw DegenerateError("sparse LU failed: " + lu_->lastErrorMessage(), period_);
  }
}

SparseFactorization::~SparseFactorization() = default;
SparseFactorization::SparseFactorization(SparseFactorization&&) noexcept = default;
SparseFactorization& SparseFactorization::operator=(SparseFactorization&&) noexcept = default;

MatrixXd SparseFactorization::solve(const MatrixXd& rhs) const {
  if (rhs.rows() != size()) throw DimensionError("right-hand side has the wrong row count");
  if (size() == 0) return MatrixXd(0, rhs.cols());
  return refine(rhs, lu_->solve(rhs), false);
}

MatrixXd SparseFactorization::solve_transpose(const MatrixXd& rhs) const {
  if (rhs.rows() != size()) throw DimensionError("right-hand side has the wrong row count");
  if (size() == 0) return MatrixXd(0, rhs.cols());
  return refine(rhs, lu_->transpose().solve(rhs), true);
}

MatrixXd SparseFactorization::refine(const MatrixXd& rhs, MatrixXd x, bool transpose) const {
  auto residual = [&](const MatrixXd& sol) -> MatrixXd {
    if (transpose) return rhs - matrix_.transpose() * sol;
    return rhs - matrix_ * sol;
  };
  for (int pass = 0;; ++pass) {
    if (!x.allFinite()) throw DegenerateError("singular system: non-finite solve result", period_);
    const MatrixXd r = residual(x);
    bool ok = true;
    for (Index j = 0; j < rhs.cols() && ok; ++j) {
      const double scale = 1.0 + rhs.col(j).lpNorm<Eigen::Infinity>();
      ok = r.col(j).lpNorm<Eigen::Infinity>() <= 0.1 * kResidualContract * scale;
    }
    if (ok) return x;
    if (pass == kMaxRefinements) {
      for (Index j = 0; j < rhs.cols(); ++j) {
        const double scale = 1.0 + rhs.col(j).lpNorm<Eigen::Infinity>();
        if (r.col(j).lpNorm<Eigen::Infinity>() > kResidualContract * scale)
          throw DegenerateError("ill-conditioned system: solve residual above contract", period_);
      }
      return x;
    }
    x += transpose ? MatrixXd(lu_->transpose().solve(r)) : MatrixXd(lu_->solve(r));
  }
}

}  // namespace lmesens
