#include "lmesens/block_tridiagonal.hpp"

#include <Eigen/LU>

namespace lmesens {

namespace {

constexpr double kMinRcond = 1e-14;

}  // namespace

BlockTridiagonal::BlockTridiagonal(Index n_blocks, Index block_size) : block_(block_size) {
  if (n_blocks < 0 || block_size < 0) throw DomainError("negative block tridiagonal size");
  const MatrixXd zero = MatrixXd::Zero(block_size, block_size);
  diag_.assign(n_blocks, zero);
  lower_.assign(n_blocks, zero);
  upper_.assign(n_blocks, zero);
  if (n_blocks > 0) {
    lower_.front().resize(0, 0);
    upper_.back().resize(0, 0);
  }
}

MatrixXd BlockTridiagonal::block(Index i, Index j) const {
  if (i == j) return diag_[i];
  if (i == j + 1) return lower_[i];
  if (j == i + 1) return upper_[i];
  return MatrixXd::Zero(block_, block_);
}

MatrixXd BlockTridiagonal::to_dense() const {
  MatrixXd out = MatrixXd::Zero(rows(), rows());
  for (Index i = 0; i < n_blocks(); ++i) {
    out.block(i * block_, i * block_, block_, block_) = diag_[i];
    if (i > 0) out.block(i * block_, (i - 1) * block_, block_, block_) = lower_[i];
    if (i + 1 < n_blocks()) out.block(i * block_, (i + 1) * block_, block_, block_) = upper_[i];
  }
  return out;
}

BlockTridiagonal BlockTridiagonal::transpose() const {
  BlockTridiagonal t(n_blocks(), block_);
  for (Index i = 0; i < n_blocks(); ++i) {
    t.diag_[i] = diag_[i].transpose();
    if (i > 0) t.lower_[i] = upper_[i - 1].transpose();
    if (i + 1 < n_blocks()) t.upper_[i] = lower_[i + 1].transpose();
  }
  return t;
}

MatrixXd BlockTridiagonal::multiply(const MatrixXd& x) const {
  if (x.rows() != rows()) throw DimensionError("block tridiagonal product: row count mismatch");
  MatrixXd y(rows(), x.cols());
  for (Index i = 0; i < n_blocks(); ++i) {
    auto yi = y.middleRows(i * block_, block_);
    yi = diag_[i] * x.middleRows(i * block_, block_);
    if (i > 0) yi += lower_[i] * x.middleRows((i - 1) * block_, block_);
    if (i + 1 < n_blocks()) yi += upper_[i] * x.middleRows((i + 1) * block_, block_);
  }
  return y;
}

MatrixXd BlockTridiagonal::solve(const MatrixXd& rhs) const {
  if (rhs.rows() != rows()) throw DimensionError("block tridiagonal solve: row count mismatch");
  const Index n = n_blocks();
  const Index b = block_;
  if (n == 0 || b == 0) return MatrixXd(rhs.rows(), rhs.cols());

  // Forward sweep: pivot_i = D_i - L_i pivot_{i-1}^{-1} U_{i-1}.
  std::vector<Eigen::PartialPivLU<MatrixXd>> pivots(n);
  std::vector<MatrixXd> gamma(n);  // pivot_i^{-1} U_i
  MatrixXd x = rhs;
  for (Index i = 0; i < n; ++i) {
    MatrixXd pivot = diag_[i];
    auto xi = x.middleRows(i * b, b);
    if (i > 0) {
      pivot -= lower_[i] * gamma[i - 1];
      xi -= lower_[i] * x.middleRows((i - 1) * b, b);
    }
    pivots[i].compute(pivot);
    const double rcond = pivots[i].rcond();
    if (!(rcond >= kMinRcond))
      throw DegenerateError("coupling system is singular at block " + std::to_string(i + 1) +
                                " (rcond " + std::to_string(rcond) + ")",
                            long(i));
    xi = pivots[i].solve(MatrixXd(xi));
    if (i + 1 < n) gamma[i] = pivots[i].solve(upper_[i]);
  }
  for (Index i = n - 2; i >= 0; --i) x.middleRows(i * b, b) -= gamma[i] * x.middleRows((i + 1) * b, b);
  return x;
}

}  // namespace lmesens
