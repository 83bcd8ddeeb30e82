// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#include "mgba/blockmat.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <type_traits>
#include <utility>

#include "mgba/error.hpp"

namespace mgba {
namespace {

template <int N>
using Dim = std::integral_constant<int, N>;
using DynDim = Dim<Eigen::Dynamic>;

// Calls f with compile-time block dimensions for the sizes that occur in
// bundle adjustment, falling back to dynamic sizes otherwise.
template <class F>
void dispatch_block_size(int r, int c, F&& f) {
  if (r == 9 && c == 9) return f(Dim<9>{}, Dim<9>{});
  if (r == 16 && c == 16) return f(Dim<16>{}, Dim<16>{});
  if (r == 9 && c == 16) return f(Dim<9>{}, Dim<16>{});
  if (r == 16 && c == 9) return f(Dim<16>{}, Dim<9>{});
  if (r == 9 && c == 3) return f(Dim<9>{}, Dim<3>{});
  if (r == 3 && c == 9) return f(Dim<3>{}, Dim<9>{});
  if (r == 3 && c == 3) return f(Dim<3>{}, Dim<3>{});
  return f(DynDim{}, DynDim{});
}

template <int R, int C>
using FixedBlock = Eigen::Matrix<double, R, C, (C == 1 && R != 1) ? Eigen::ColMajor : Eigen::RowMajor>;

template <int N>
using FixedVec = Eigen::Matrix<double, N, 1>;

void check_size(const char* what, Index expected, Index actual) {
  if (expected != actual) {
    throw DimensionError(what, static_cast<std::size_t>(expected), static_cast<std::size_t>(actual));
  }
}

}  // namespace

BlockSparseMatrix::BlockSparseMatrix(int row_block_size, int col_block_size, Index n_block_rows,
                                     Index n_block_cols)
    : row_block_size_(row_block_size),
      col_block_size_(col_block_size),
      n_block_rows_(n_block_rows),
      n_block_cols_(n_block_cols),
      block_row_offsets_(static_cast<std::size_t>(n_block_rows + 1), 0) {
  validate();
}

BlockSparseMatrix::BlockSparseMatrix(int row_block_size, int col_block_size, Index n_block_rows,
                                     Index n_block_cols, std::vector<Index> block_row_offsets,
                                     std::vector<Index> block_col_indices,
                                     std::vector<double> values)
    : row_block_size_(row_block_size),
      col_block_size_(col_block_size),
      n_block_rows_(n_block_rows),
      n_block_cols_(n_block_cols),
      block_row_offsets_(std::move(block_row_offsets)),
      block_col_indices_(std::move(block_col_indices)),
      values_(std::move(values)) {
  validate();
}

void BlockSparseMatrix::validate() const {
  if (row_block_size_ <= 0 || col_block_size_ <= 0) {
    throw ContractError("BlockSparseMatrix: block sizes must be positive");
  }
  if (n_block_rows_ < 0 || n_block_cols_ < 0) {
    throw ContractError("BlockSparseMatrix: negative block counts");
  }
  if (block_row_offsets_.size() != static_cast<std::size_t>(n_block_rows_ + 1) ||
      block_row_offsets_.front() != 0) {
    throw ContractError("BlockSparseMatrix: malformed row offsets");
  }
  if (block_row_offsets_.back() != static_cast<Index>(block_col_indices_.size())) {
    throw ContractError("BlockSparseMatrix: row offsets do not match stored block count");
  }
  const std::size_t block_len = static_cast<std::size_t>(row_block_size_) * col_block_size_;
  if (values_.size() != block_col_indices_.size() * block_len) {
    throw ContractError("BlockSparseMatrix: value storage does not match stored block count");
  }
  for (Index i = 0; i < n_block_rows_; ++i) {
    const Index begin = block_row_offsets_[i];
    const Index end = block_row_offsets_[i + 1];
    if (end < begin) throw ContractError("BlockSparseMatrix: row offsets decrease");
    for (Index k = begin; k < end; ++k) {
      const Index c = block_col_indices_[k];
      if (c < 0 || c >= n_block_cols_) {
        throw ContractError("BlockSparseMatrix: column index out of range");
      }
      if (k > begin && block_col_indices_[k - 1] >= c) {
        throw ContractError("BlockSparseMatrix: column indices not strictly increasing");
      }
    }
  }
}

BlockSparseMatrix BlockSparseMatrix::identity(int block_size, Index n_blocks) {
  std::vector<Index> offsets(static_cast<std::size_t>(n_blocks + 1));
  std::iota(offsets.begin(), offsets.end(), Index{0});
  std::vector<Index> cols(static_cast<std::size_t>(n_blocks));
  std::iota(cols.begin(), cols.end(), Index{0});
  const std::size_t len = static_cast<std::size_t>(block_size) * block_size;
  std::vector<double> values(len * static_cast<std::size_t>(n_blocks), 0.0);
  for (Index b = 0; b < n_blocks; ++b) {
    for (int d = 0; d < block_size; ++d) {
      values[static_cast<std::size_t>(b) * len + static_cast<std::size_t>(d) * (block_size + 1)] = 1.0;
    }
  }
  return BlockSparseMatrix(block_size, block_size, n_blocks, n_blocks, std::move(offsets),
                           std::move(cols), std::move(values));
}

BlockSparseMatrix BlockSparseMatrix::zeros_like(const BlockSparseMatrix& pattern) {
  BlockSparseMatrix m = pattern;
  std::fill(m.values_.begin(), m.values_.end(), 0.0);
  return m;
}

std::span<const Index> BlockSparseMatrix::row_columns(Index block_row) const {
  const auto begin = static_cast<std::size_t>(block_row_offsets_[block_row]);
  const auto end = static_cast<std::size_t>(block_row_offsets_[block_row + 1]);
  return std::span<const Index>(block_col_indices_).subspan(begin, end - begin);
}

BlockRef BlockSparseMatrix::block(Index k) {
  return BlockRef(values_.data() + k * row_block_size_ * col_block_size_, row_block_size_,
                  col_block_size_);
}

ConstBlockRef BlockSparseMatrix::block(Index k) const {
  return ConstBlockRef(values_.data() + k * row_block_size_ * col_block_size_, row_block_size_,
                       col_block_size_);
}

std::optional<Index> BlockSparseMatrix::find(Index row, Index col) const {
  if (row < 0 || row >= n_block_rows_) return std::nullopt;
  const auto first = block_col_indices_.begin() + block_row_offsets_[row];
  const auto last = block_col_indices_.begin() + block_row_offsets_[row + 1];
  const auto it = std::lower_bound(first, last, col);
  if (it == last || *it != col) return std::nullopt;
  return static_cast<Index>(it - block_col_indices_.begin());
}

Vector BlockSparseMatrix::multiply(const Vector& x) const {
  Vector y = Vector::Zero(rows());
  multiply_add(x, y, 1.0);
  return y;
}

void BlockSparseMatrix::multiply_add(const Vector& x, Vector& y, double alpha) const {
  check_size("BlockSparseMatrix::multiply: input", cols(), x.size());
  check_size("BlockSparseMatrix::multiply: output", rows(), y.size());
  dispatch_block_size(row_block_size_, col_block_size_, [&](auto rdim, auto cdim) {
    constexpr int R = decltype(rdim)::value;
    constexpr int C = decltype(cdim)::value;
    using Blk = Eigen::Map<const FixedBlock<R, C>>;
    using InVec = Eigen::Map<const FixedVec<C>>;
    using OutVec = Eigen::Map<FixedVec<R>>;
    const int rb = row_block_size_;
    const int cb = col_block_size_;
    const Index len = static_cast<Index>(rb) * cb;
    for (Index i = 0; i < n_block_rows_; ++i) {
      OutVec yi(y.data() + i * rb, rb);
      for (Index k = block_row_offsets_[i]; k < block_row_offsets_[i + 1]; ++k) {
        const Index j = block_col_indices_[k];
        yi.noalias() += alpha * (Blk(values_.data() + k * len, rb, cb) * InVec(x.data() + j * cb, cb));
      }
    }
  });
}

Vector BlockSparseMatrix::transpose_multiply(const Vector& x) const {
  Vector y = Vector::Zero(cols());
  transpose_multiply_add(x, y, 1.0);
  return y;
}

void BlockSparseMatrix::transpose_multiply_add(const Vector& x, Vector& y, double alpha) const {
  check_size("BlockSparseMatrix::transpose_multiply: input", rows(), x.size());
  check_size("BlockSparseMatrix::transpose_multiply: output", cols(), y.size());
  dispatch_block_size(row_block_size_, col_block_size_, [&](auto rdim, auto cdim) {
    constexpr int R = decltype(rdim)::value;
    constexpr int C = decltype(cdim)::value;
    using Blk = Eigen::Map<const FixedBlock<R, C>>;
    using InVec = Eigen::Map<const FixedVec<R>>;
    using OutVec = Eigen::Map<FixedVec<C>>;
    const int rb = row_block_size_;
    const int cb = col_block_size_;
    const Index len = static_cast<Index>(rb) * cb;
    for (Index i = 0; i < n_block_rows_; ++i) {
      InVec xi(x.data() + i * rb, rb);
      for (Index k = block_row_offsets_[i]; k < block_row_offsets_[i + 1]; ++k) {
        const Index j = block_col_indices_[k];
        OutVec yj(y.data() + j * cb, cb);
        yj.noalias() += alpha * (Blk(values_.data() + k * len, rb, cb).transpose() * xi);
      }
    }
  });
}

BlockSparseMatrix BlockSparseMatrix::transpose() const {
  const Index nnzb = num_blocks();
  std::vector<Index> offsets(static_cast<std::size_t>(n_block_cols_ + 1), 0);
  for (Index c : block_col_indices_) ++offsets[static_cast<std::size_t>(c + 1)];
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  std::vector<Index> cols(static_cast<std::size_t>(nnzb));
  std::vector<double> values(values_.size());
  std::vector<Index> cursor(offsets.begin(), offsets.end() - 1);
  const Index len = static_cast<Index>(row_block_size_) * col_block_size_;
  for (Index i = 0; i < n_block_rows_; ++i) {
    for (Index k = block_row_offsets_[i]; k < block_row_offsets_[i + 1]; ++k) {
      const Index j = block_col_indices_[k];
      const Index dst = cursor[static_cast<std::size_t>(j)]++;
      cols[static_cast<std::size_t>(dst)] = i;
      BlockRef(values.data() + dst * len, col_block_size_, row_block_size_) = block(k).transpose();
    }
  }
  return BlockSparseMatrix(col_block_size_, row_block_size_, n_block_cols_, n_block_rows_,
                           std::move(offsets), std::move(cols), std::move(values));
}

DenseMatrix BlockSparseMatrix::to_dense() const {
  DenseMatrix d = DenseMatrix::Zero(rows(), cols());
  for (Index i = 0; i < n_block_rows_; ++i) {
    for (Index k = block_row_offsets_[i]; k < block_row_offsets_[i + 1]; ++k) {
      d.block(i * row_block_size_, block_col_indices_[k] * col_block_size_, row_block_size_,
              col_block_size_) = block(k);
    }
  }
  return d;
}

double BlockSparseMatrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

void BlockSparseMatrix::write_matrix_market(std::ostream& out) const {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << rows() << ' ' << cols() << ' ' << num_scalar_nonzeros() << '\n';
  out << std::setprecision(17);
  for (Index i = 0; i < n_block_rows_; ++i) {
    for (Index k = block_row_offsets_[i]; k < block_row_offsets_[i + 1]; ++k) {
      const Index j = block_col_indices_[k];
      const auto b = block(k);
      for (int r = 0; r < row_block_size_; ++r) {
        for (int c = 0; c < col_block_size_; ++c) {
          out << i * row_block_size_ + r + 1 << ' ' << j * col_block_size_ + c + 1 << ' '
              << b(r, c) << '\n';
        }
      }
    }
  }
}

bool BlockSparseMatrix::same_pattern(const BlockSparseMatrix& other) const {
  return row_block_size_ == other.row_block_size_ && col_block_size_ == other.col_block_size_ &&
         n_block_rows_ == other.n_block_rows_ && n_block_cols_ == other.n_block_cols_ &&
         block_row_offsets_ == other.block_row_offsets_ &&
         block_col_indices_ == other.block_col_indices_;
}

BlockSparseBuilder::BlockSparseBuilder(int row_block_size, int col_block_size, Index n_block_rows,
                                       Index n_block_cols)
    : row_block_size_(row_block_size),
      col_block_size_(col_block_size),
      n_block_rows_(n_block_rows),
      n_block_cols_(n_block_cols) {}

void BlockSparseBuilder::reserve(Index n_blocks) {
  rows_.reserve(static_cast<std::size_t>(n_blocks));
  cols_.reserve(static_cast<std::size_t>(n_blocks));
  values_.reserve(static_cast<std::size_t>(n_blocks * row_block_size_ * col_block_size_));
}

void BlockSparseBuilder::add(Index row, Index col, const Eigen::Ref<const RowMajorMatrix>& block) {
  if (row < 0 || row >= n_block_rows_ || col < 0 || col >= n_block_cols_) {
    throw ContractError("BlockSparseBuilder::add: block index out of range");
  }
  if (block.rows() != row_block_size_ || block.cols() != col_block_size_) {
    throw DimensionError("BlockSparseBuilder::add: block shape",
                         static_cast<std::size_t>(row_block_size_ * col_block_size_),
                         static_cast<std::size_t>(block.size()));
  }
  rows_.push_back(row);
  cols_.push_back(col);
  for (int r = 0; r < row_block_size_; ++r) {
    for (int c = 0; c < col_block_size_; ++c) values_.push_back(block(r, c));
  }
}

BlockSparseMatrix BlockSparseBuilder::build() && {
  const std::size_t n = rows_.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rows_[a] != rows_[b] ? rows_[a] < rows_[b] : cols_[a] < cols_[b];
  });
  const std::size_t len = static_cast<std::size_t>(row_block_size_) * col_block_size_;
  std::vector<Index> offsets(static_cast<std::size_t>(n_block_rows_ + 1), 0);
  std::vector<Index> cols;
  std::vector<double> values;
  cols.reserve(n);
  values.reserve(n * len);
  Index last_row = -1;
  Index last_col = -1;
  for (std::size_t idx : order) {
    const Index r = rows_[idx];
    const Index c = cols_[idx];
    const double* src = values_.data() + idx * len;
    if (r == last_row && c == last_col) {
      double* dst = values.data() + values.size() - len;
      for (std::size_t t = 0; t < len; ++t) dst[t] += src[t];
    } else {
      cols.push_back(c);
      values.insert(values.end(), src, src + len);
      ++offsets[static_cast<std::size_t>(r + 1)];
      last_row = r;
      last_col = c;
    }
  }
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  return BlockSparseMatrix(row_block_size_, col_block_size_, n_block_rows_, n_block_cols_,
                           std::move(offsets), std::move(cols), std::move(values));
}

BlockSparseMatrix multiply(const BlockSparseMatrix& a, const BlockSparseMatrix& b) {
  if (a.n_block_cols() != b.n_block_rows() || a.col_block_size() != b.row_block_size()) {
    throw DimensionError("multiply: inner dimension", static_cast<std::size_t>(a.cols()),
                         static_cast<std::size_t>(b.rows()));
  }
  const Index n_rows = a.n_block_rows();
  const Index n_cols = b.n_block_cols();
  const int rb = a.row_block_size();
  const int ib = a.col_block_size();
  const int cb = b.col_block_size();

  // Symbolic pass.
  std::vector<Index> offsets(static_cast<std::size_t>(n_rows + 1), 0);
  std::vector<Index> marker(static_cast<std::size_t>(n_cols), -1);
  for (Index i = 0; i < n_rows; ++i) {
    Index count = 0;
    for (Index ka : a.row_columns(i)) {
      for (Index j : b.row_columns(ka)) {
        if (marker[static_cast<std::size_t>(j)] != i) {
          marker[static_cast<std::size_t>(j)] = i;
          ++count;
        }
      }
    }
    offsets[static_cast<std::size_t>(i + 1)] = offsets[static_cast<std::size_t>(i)] + count;
  }
  const Index nnzb = offsets.back();
  std::vector<Index> cols(static_cast<std::size_t>(nnzb));
  std::fill(marker.begin(), marker.end(), -1);
  for (Index i = 0; i < n_rows; ++i) {
    Index pos = offsets[static_cast<std::size_t>(i)];
    for (Index ka : a.row_columns(i)) {
      for (Index j : b.row_columns(ka)) {
        if (marker[static_cast<std::size_t>(j)] != i) {
          marker[static_cast<std::size_t>(j)] = i;
          cols[static_cast<std::size_t>(pos++)] = j;
        }
      }
    }
    std::sort(cols.begin() + offsets[static_cast<std::size_t>(i)], cols.begin() + pos);
  }

  // Numeric pass.
  const Index len = static_cast<Index>(rb) * cb;
  std::vector<double> values(static_cast<std::size_t>(nnzb * len), 0.0);
  std::vector<Index> slot(static_cast<std::size_t>(n_cols), -1);
  const auto a_offsets = a.block_row_offsets();
  const auto b_offsets = b.block_row_offsets();
  const auto b_cols = b.block_col_indices();
  for (Index i = 0; i < n_rows; ++i) {
    for (Index k = offsets[static_cast<std::size_t>(i)]; k < offsets[static_cast<std::size_t>(i + 1)]; ++k) {
      slot[static_cast<std::size_t>(cols[static_cast<std::size_t>(k)])] = k;
    }
    for (Index pa = a_offsets[static_cast<std::size_t>(i)]; pa < a_offsets[static_cast<std::size_t>(i + 1)]; ++pa) {
      const Index ka = a.block_col_indices()[static_cast<std::size_t>(pa)];
      const auto ablk = a.block(pa);
      for (Index pb = b_offsets[static_cast<std::size_t>(ka)]; pb < b_offsets[static_cast<std::size_t>(ka + 1)]; ++pb) {
        const Index j = b_cols[static_cast<std::size_t>(pb)];
        BlockRef dst(values.data() + slot[static_cast<std::size_t>(j)] * len, rb, cb);
        dst.noalias() += ablk * b.block(pb);
      }
    }
  }
  (void)ib;
  return BlockSparseMatrix(rb, cb, n_rows, n_cols, std::move(offsets), std::move(cols),
                           std::move(values));
}

BlockSparseMatrix triple_product(const BlockSparseMatrix& r, const BlockSparseMatrix& a,
                                 const BlockSparseMatrix& p) {
  if (a.n_block_rows() != a.n_block_cols() || a.row_block_size() != a.col_block_size()) {
    throw DimensionError("triple_product: A must be square", static_cast<std::size_t>(a.rows()),
                         static_cast<std::size_t>(a.cols()));
  }
  if (p.rows() != a.cols()) {
    throw DimensionError("triple_product: P rows", static_cast<std::size_t>(a.cols()),
                         static_cast<std::size_t>(p.rows()));
  }
  if (r.cols() != a.rows()) {
    throw DimensionError("triple_product: R cols", static_cast<std::size_t>(a.rows()),
                         static_cast<std::size_t>(r.cols()));
  }
  if (!r.same_pattern(p.transpose())) {
    throw ContractError("triple_product: R does not have the block pattern of P^T");
  }
  return multiply(multiply(r, a), p);
}

BlockDiagMatrix::BlockDiagMatrix(int block_size, Index n_blocks)
    : block_size_(block_size),
      n_blocks_(n_blocks),
      values_(static_cast<std::size_t>(n_blocks * block_size * block_size), 0.0) {
  if (block_size <= 0 || n_blocks < 0) {
    throw ContractError("BlockDiagMatrix: invalid shape");
  }
}

BlockRef BlockDiagMatrix::block(Index i) {
  return BlockRef(values_.data() + i * block_size_ * block_size_, block_size_, block_size_);
}

ConstBlockRef BlockDiagMatrix::block(Index i) const {
  return ConstBlockRef(values_.data() + i * block_size_ * block_size_, block_size_, block_size_);
}

bool cholesky_factor(const Eigen::Ref<const RowMajorMatrix>& a, Eigen::Ref<RowMajorMatrix> lower) {
  const Index n = a.rows();
  double max_diag = 0.0;
  for (Index i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a(i, i)));
  const double threshold = 1e-15 * max_diag;
  lower.setZero();
  for (Index j = 0; j < n; ++j) {
    double d = a(j, j);
    for (Index k = 0; k < j; ++k) d -= lower(j, k) * lower(j, k);
    if (!(d > threshold) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    lower(j, j) = ljj;
    for (Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Index k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      lower(i, j) = s / ljj;
    }
  }
  return true;
}

void BlockDiagMatrix::factor() {
  const Index len = static_cast<Index>(block_size_) * block_size_;
  factors_.assign(values_.size(), 0.0);
  for (Index i = 0; i < n_blocks_; ++i) {
    BlockRef lower(factors_.data() + i * len, block_size_, block_size_);
    if (!cholesky_factor(std::as_const(*this).block(i), lower)) {
      factored_ = false;
      throw IndefiniteBlockError("BlockDiagMatrix::factor", static_cast<std::size_t>(i));
    }
  }
  factored_ = true;
}

Vector BlockDiagMatrix::multiply(const Vector& x) const {
  check_size("BlockDiagMatrix::multiply", rows(), x.size());
  Vector y(rows());
  for (Index i = 0; i < n_blocks_; ++i) {
    y.segment(i * block_size_, block_size_).noalias() = block(i) * x.segment(i * block_size_, block_size_);
  }
  return y;
}

void BlockDiagMatrix::solve_block(Index i, Eigen::Ref<Eigen::VectorXd> rhs) const {
  const Index len = static_cast<Index>(block_size_) * block_size_;
  ConstBlockRef lower(factors_.data() + i * len, block_size_, block_size_);
  lower.triangularView<Eigen::Lower>().solveInPlace(rhs);
  lower.transpose().triangularView<Eigen::Upper>().solveInPlace(rhs);
}

void BlockDiagMatrix::solve_in_place(Eigen::Ref<Vector> rhs) const {
  if (!factored_) throw ContractError("BlockDiagMatrix::solve: not factored");
  check_size("BlockDiagMatrix::solve", rows(), rhs.size());
  for (Index i = 0; i < n_blocks_; ++i) {
    solve_block(i, rhs.segment(i * block_size_, block_size_));
  }
}

Vector BlockDiagMatrix::solve(const Vector& rhs) const {
  Vector x = rhs;
  solve_in_place(x);
  return x;
}

DenseMatrix BlockDiagMatrix::block_inverse(Index i) const {
  if (!factored_) throw ContractError("BlockDiagMatrix::block_inverse: not factored");
  DenseMatrix inv = DenseMatrix::Identity(block_size_, block_size_);
  for (int c = 0; c < block_size_; ++c) {
    Eigen::VectorXd col = inv.col(c);
    solve_block(i, col);
    inv.col(c) = col;
  }
  return inv;
}

DenseMatrix BlockDiagMatrix::to_dense() const {
  DenseMatrix d = DenseMatrix::Zero(rows(), rows());
  for (Index i = 0; i < n_blocks_; ++i) {
    d.block(i * block_size_, i * block_size_, block_size_, block_size_) = block(i);
  }
  return d;
}

}  // namespace mgba
