// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MGBA_BLOCKMAT_HPP
#define MGBA_BLOCKMAT_HPP

#include <Eigen/Core>

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace mgba {

using Index = std::ptrdiff_t;
using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using BlockRef = Eigen::Map<RowMajorMatrix>;
using ConstBlockRef = Eigen::Map<const RowMajorMatrix>;

/// Tall dense matrix, column-major. Holds near-nullspace bases.
using DenseTall = Eigen::MatrixXd;

// Fixed-block-size sparse matrix in block-compressed-row layout. Blocks are
// dense and stored row-major, one after another in the order of
// block_col_indices. Immutable once constructed, apart from block values.
class BlockSparseMatrix {
 public:
  BlockSparseMatrix() = default;

  /// Empty pattern of the given shape.
  BlockSparseMatrix(int row_block_size, int col_block_size, Index n_block_rows,
                    Index n_block_cols);

  /// Takes ownership of a fully formed layout; throws ContractError if any
  /// structural invariant is violated.
  BlockSparseMatrix(int row_block_size, int col_block_size, Index n_block_rows,
                    Index n_block_cols, std::vector<Index> block_row_offsets,
                    std::vector<Index> block_col_indices, std::vector<double> values);

  static BlockSparseMatrix identity(int block_size, Index n_blocks);

  /// Pattern only; all block values zero.
  static BlockSparseMatrix zeros_like(const BlockSparseMatrix& pattern);

  int row_block_size() const { return row_block_size_; }
  int col_block_size() const { return col_block_size_; }
  Index n_block_rows() const { return n_block_rows_; }
  Index n_block_cols() const { return n_block_cols_; }
  Index rows() const { return n_block_rows_ * row_block_size_; }
  Index cols() const { return n_block_cols_ * col_block_size_; }
  Index num_blocks() const { return static_cast<Index>(block_col_indices_.size()); }
  Index num_scalar_nonzeros() const { return num_blocks() * row_block_size_ * col_block_size_; }

  std::span<const Index> block_row_offsets() const { return block_row_offsets_; }
  std::span<const Index> block_col_indices() const { return block_col_indices_; }
  std::span<const Index> row_columns(Index block_row) const;
  std::span<const double> values() const { return values_; }

  /// k-th stored block (k indexes block_col_indices).
  BlockRef block(Index k);
  ConstBlockRef block(Index k) const;

  /// Storage index of block (row, col), if stored.
  std::optional<Index> find(Index row, Index col) const;

  Vector multiply(const Vector& x) const;
  /// y += alpha * M x
  void multiply_add(const Vector& x, Vector& y, double alpha = 1.0) const;
  Vector transpose_multiply(const Vector& x) const;
  /// y += alpha * M^T x
  void transpose_multiply_add(const Vector& x, Vector& y, double alpha = 1.0) const;

  BlockSparseMatrix transpose() const;
  DenseMatrix to_dense() const;
  double frobenius_norm() const;

  /// Scalar-expanded Matrix Market coordinate output (1-based).
  void write_matrix_market(std::ostream& out) const;

  /// True iff dimensions and block patterns agree.
  bool same_pattern(const BlockSparseMatrix& other) const;

 private:
  void validate() const;

  int row_block_size_ = 1;
  int col_block_size_ = 1;
  Index n_block_rows_ = 0;
  Index n_block_cols_ = 0;
  std::vector<Index> block_row_offsets_{0};
  std::vector<Index> block_col_indices_;
  std::vector<double> values_;
};

// Triplet-style assembly of a BlockSparseMatrix. Duplicate (row, col)
// entries are summed when the matrix is built.
class BlockSparseBuilder {
 public:
  BlockSparseBuilder(int row_block_size, int col_block_size, Index n_block_rows,
                     Index n_block_cols);

  void add(Index row, Index col, const Eigen::Ref<const RowMajorMatrix>& block);
  void reserve(Index n_blocks);
  BlockSparseMatrix build() &&;

 private:
  int row_block_size_;
  int col_block_size_;
  Index n_block_rows_;
  Index n_block_cols_;
  std::vector<Index> rows_;
  std::vector<Index> cols_;
  std::vector<double> values_;
};

/// C = A * B. Symbolic pass sizes the output before the numeric pass.
BlockSparseMatrix multiply(const BlockSparseMatrix& a, const BlockSparseMatrix& b);

/// Galerkin product R * A * P. R must have the block pattern of P^T.
BlockSparseMatrix triple_product(const BlockSparseMatrix& r, const BlockSparseMatrix& a,
                                 const BlockSparseMatrix& p);

// Block-diagonal matrix of square dense blocks with a per-block Cholesky
// cache.
class BlockDiagMatrix {
 public:
  BlockDiagMatrix() = default;
  BlockDiagMatrix(int block_size, Index n_blocks);

  int block_size() const { return block_size_; }
  Index n_blocks() const { return n_blocks_; }
  Index rows() const { return n_blocks_ * block_size_; }

  BlockRef block(Index i);
  ConstBlockRef block(Index i) const;

  /// Cholesky-factors every block. Call again after editing blocks. Throws IndefiniteBlockError naming the
  /// first block whose factorization fails.
  void factor();
  bool is_factored() const { return factored_; }

  Vector multiply(const Vector& x) const;
  /// Solves with the cached factors. Requires factor().
  Vector solve(const Vector& rhs) const;
  void solve_in_place(Eigen::Ref<Vector> rhs) const;
  /// Solve for block i only, in place on a block_size segment.
  void solve_block(Index i, Eigen::Ref<Eigen::VectorXd> rhs) const;
  /// Explicit inverse of block i (from the factors).
  DenseMatrix block_inverse(Index i) const;

  DenseMatrix to_dense() const;

 private:
  int block_size_ = 1;
  Index n_blocks_ = 0;
  std::vector<double> values_;
  std::vector<double> factors_;
  bool factored_ = false;
};

/// Cholesky of one dense SPD block into a lower factor; returns false when a
/// pivot is not safely positive.
bool cholesky_factor(const Eigen::Ref<const RowMajorMatrix>& a, Eigen::Ref<RowMajorMatrix> lower);

}  // namespace mgba

#endif  // MGBA_BLOCKMAT_HPP
