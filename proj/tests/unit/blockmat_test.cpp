// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#include "mgba/blockmat.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "mgba/error.hpp"
#include "mgba/random.hpp"
#include "oracles.hpp"

namespace mgba {
namespace {

BlockSparseMatrix random_block_sparse(std::uint64_t seed, int rb, int cb, Index nr, Index nc, double density) {
  Rng rng(seed);
  BlockSparseBuilder builder(rb, cb, nr, nc);
  for (Index i = 0; i < nr; ++i) {
    for (Index j = 0; j < nc; ++j) {
      if (rng.uniform() >= density) continue;
      RowMajorMatrix blk(rb, cb);
      for (Index r = 0; r < rb; ++r) {
        for (Index c = 0; c < cb; ++c) blk(r, c) = rng.normal();
      }
      builder.add(i, j, blk);
    }
  }
  return std::move(builder).build();
}

Vector random_vector(std::uint64_t seed, Index n) {
  Rng rng(seed);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

TEST(BlockSparse, IdentityMatvec) {
  const auto m = BlockSparseMatrix::identity(2, 1);
  const Vector y = m.multiply(Vector::Map(std::array<double, 2>{3.0, 4.0}.data(), 2));
  EXPECT_EQ(y, (Vector(2) << 3.0, 4.0).finished());
}

TEST(BlockSparse, EmptyMatvecIsZero) {
  const BlockSparseMatrix m(3, 3, 2, 2);
  const Vector y = m.multiply(Vector::Ones(6));
  EXPECT_EQ(y, Vector::Zero(6));
}

TEST(BlockSparse, ScalarBlocksMatchDense) {
  BlockSparseBuilder b(1, 1, 2, 2);
  b.add(0, 0, RowMajorMatrix::Constant(1, 1, 2.0));
  b.add(0, 1, RowMajorMatrix::Constant(1, 1, 1.0));
  b.add(1, 1, RowMajorMatrix::Constant(1, 1, 3.0));
  const auto m = std::move(b).build();
  const Vector y = m.multiply(Vector::Ones(2));
  EXPECT_EQ(y, (Vector(2) << 3.0, 3.0).finished());
}

TEST(BlockSparse, DimensionMismatchNamesSizes) {
  const auto m = BlockSparseMatrix::identity(3, 2);
  try {
    m.multiply(Vector::Zero(5));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_EQ(e.expected(), 6u);
    EXPECT_EQ(e.actual(), 5u);
  }
}

TEST(BlockSparse, InvalidLayoutRejected) {
  EXPECT_THROW(BlockSparseMatrix(1, 1, 2, 2, {0, 2, 1}, {0, 1}, {1.0, 2.0}), ContractError);
  EXPECT_THROW(BlockSparseMatrix(1, 1, 1, 2, {0, 2}, {1, 0}, {1.0, 2.0}), ContractError);
  EXPECT_THROW(BlockSparseMatrix(1, 1, 1, 2, {0, 1}, {5}, {1.0}), ContractError);
  EXPECT_THROW(BlockSparseMatrix(2, 2, 1, 1, {0, 1}, {0}, {1.0}), ContractError);
}

TEST(BlockSparse, BuilderSumsDuplicates) {
  BlockSparseBuilder b(1, 1, 1, 1);
  b.add(0, 0, RowMajorMatrix::Constant(1, 1, 2.0));
  b.add(0, 0, RowMajorMatrix::Constant(1, 1, 5.0));
  const auto m = std::move(b).build();
  ASSERT_EQ(m.num_blocks(), 1);
  EXPECT_EQ(m.block(0)(0, 0), 7.0);
}

TEST(BlockSparse, TransposeOfOffDiagonalBlock) {
  RowMajorMatrix blk(2, 3);
  blk << 1, 2, 3, 4, 5, 6;
  BlockSparseBuilder b(2, 3, 2, 2);
  b.add(0, 1, blk);
  const auto t = std::move(b).build().transpose();
  EXPECT_EQ(t.row_block_size(), 3);
  EXPECT_EQ(t.col_block_size(), 2);
  ASSERT_TRUE(t.find(1, 0).has_value());
  EXPECT_EQ(RowMajorMatrix(t.block(*t.find(1, 0))), RowMajorMatrix(blk.transpose()));
  EXPECT_FALSE(t.find(0, 1).has_value());
}

TEST(BlockSparse, TransposeTwiceIsIdentity) {
  const auto m = random_block_sparse(7, 9, 3, 5, 8, 0.4);
  const auto tt = m.transpose().transpose();
  EXPECT_TRUE(tt.same_pattern(m));
  EXPECT_EQ(tt.to_dense(), m.to_dense());
}

TEST(BlockSparse, MatvecLinearity) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto m = random_block_sparse(s, 9, 9, 6, 6, 0.5);
    const Vector x = random_vector(100 + s, m.cols());
    const Vector y = random_vector(200 + s, m.cols());
    const double alpha = 1.7;
    const double beta = -0.3;
    const Vector lhs = m.multiply(alpha * x + beta * y);
    const Vector rhs = alpha * m.multiply(x) + beta * m.multiply(y);
    EXPECT_LE((lhs - rhs).norm(), 1e-12 * rhs.norm());
  }
}

TEST(BlockSparse, TransposeAdjointIdentity) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto m = random_block_sparse(s + 10, 9, 3, 7, 11, 0.3);
    const Vector x = random_vector(300 + s, m.cols());
    const Vector y = random_vector(400 + s, m.rows());
    const double lhs = m.multiply(x).dot(y);
    const double rhs = x.dot(m.transpose_multiply(y));
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::abs(rhs) + 1e-14);
    EXPECT_LE((m.transpose().multiply(y) - m.transpose_multiply(y)).norm(), 1e-12 * y.norm() * m.frobenius_norm());
  }
}

TEST(BlockSparse, MatvecMatchesDenseForAllBlockShapes) {
  const std::pair<int, int> shapes[] = {{9, 9}, {16, 16}, {9, 16}, {16, 9}, {3, 9}, {2, 5}};
  for (const auto& [rb, cb] : shapes) {
    const auto m = random_block_sparse(rb * 31 + cb, rb, cb, 4, 5, 0.5);
    const Vector x = random_vector(rb + cb, m.cols());
    EXPECT_LE((m.multiply(x) - m.to_dense() * x).norm(), 1e-12 * (m.to_dense() * x).norm() + 1e-14);
  }
}

TEST(BlockSparse, MultiplyMatchesDense) {
  const auto a = random_block_sparse(1, 9, 9, 5, 5, 0.4);
  const auto b = random_block_sparse(2, 9, 16, 5, 3, 0.4);
  const auto c = multiply(a, b);
  EXPECT_LE(testing::relative_error(c.to_dense(), a.to_dense() * b.to_dense()), 1e-13);
}

TEST(TripleProduct, BlockIdentityProlongationReturnsA) {
  const auto base = random_block_sparse(3, 9, 9, 4, 4, 0.6);
  const auto a = multiply(base.transpose(), base);
  const auto p = BlockSparseMatrix::identity(9, 4);
  EXPECT_LE(testing::relative_error(triple_product(p.transpose(), a, p).to_dense(), a.to_dense()), 1e-14);
}

TEST(TripleProduct, IdentityOperatorGivesPtP) {
  const auto p = random_block_sparse(4, 9, 16, 6, 2, 0.5);
  const auto a = BlockSparseMatrix::identity(9, 6);
  const DenseMatrix pd = p.to_dense();
  EXPECT_LE(testing::relative_error(triple_product(p.transpose(), a, p).to_dense(), pd.transpose() * pd), 1e-13);
}

TEST(TripleProduct, SixCamerasTwoAggregatesMatchDense) {
  const auto base = random_block_sparse(5, 9, 9, 6, 6, 0.5);
  auto a = multiply(base.transpose(), base);
  Rng rng(6);
  BlockSparseBuilder pb(9, 16, 6, 2);
  for (Index i = 0; i < 6; ++i) {
    RowMajorMatrix blk(9, 16);
    for (Index r = 0; r < 9; ++r) {
      for (Index c = 0; c < 16; ++c) blk(r, c) = rng.normal();
    }
    pb.add(i, i < 3 ? 0 : 1, blk);
  }
  const auto p = std::move(pb).build();
  const DenseMatrix pd = p.to_dense();
  const DenseMatrix expected = pd.transpose() * a.to_dense() * pd;
  EXPECT_LE(testing::relative_error(triple_product(p.transpose(), a, p).to_dense(), expected), 1e-12);
}

TEST(TripleProduct, RejectsRThatIsNotPTranspose) {
  const auto a = BlockSparseMatrix::identity(9, 2);
  BlockSparseBuilder pb(9, 16, 2, 2);
  pb.add(0, 0, RowMajorMatrix::Ones(9, 16));
  pb.add(1, 1, RowMajorMatrix::Ones(9, 16));
  const auto p = std::move(pb).build();
  BlockSparseBuilder rb(16, 9, 2, 2);
  rb.add(0, 1, RowMajorMatrix::Ones(16, 9));
  rb.add(1, 0, RowMajorMatrix::Ones(16, 9));
  EXPECT_THROW(triple_product(std::move(rb).build(), a, p), ContractError);
}

TEST(BlockDiag, IdentityBlocksSolveIsIdentity) {
  BlockDiagMatrix d(3, 2);
  d.block(0) = RowMajorMatrix::Identity(3, 3);
  d.block(1) = RowMajorMatrix::Identity(3, 3);
  d.factor();
  const Vector r = random_vector(1, 6);
  EXPECT_EQ(d.solve(r), r);
}

TEST(BlockDiag, DiagonalBlockHandInverse) {
  BlockDiagMatrix d(2, 1);
  d.block(0) << 4.0, 0.0, 0.0, 9.0;
  d.factor();
  const Vector x = d.solve((Vector(2) << 4.0, 9.0).finished());
  EXPECT_NEAR(x(0), 1.0, 1e-15);
  EXPECT_NEAR(x(1), 1.0, 1e-15);
}

TEST(BlockDiag, SingularBlockReportsIndex) {
  BlockDiagMatrix d(2, 3);
  d.block(0) = RowMajorMatrix::Identity(2, 2);
  d.block(1) = RowMajorMatrix::Identity(2, 2);
  d.block(2) << 1.0, 1.0, 1.0, 1.0;
  try {
    d.factor();
    FAIL() << "expected IndefiniteBlockError";
  } catch (const IndefiniteBlockError& e) {
    EXPECT_EQ(e.block_index(), 2u);
  }
}

TEST(BlockDiag, RandomSpdSolveRoundTrip) {
  BlockDiagMatrix d(9, 4);
  for (Index i = 0; i < 4; ++i) {
    d.block(i) = testing::random_spd(50 + static_cast<std::uint64_t>(i), 9, 0.5, 20.0);
  }
  const Vector x = random_vector(9, 36);
  const Vector mx = d.multiply(x);
  d.factor();
  EXPECT_LE((d.solve(mx) - x).norm(), 1e-12 * x.norm());
  EXPECT_LE(testing::relative_error(d.block_inverse(2) * DenseMatrix(d.block(2)), DenseMatrix::Identity(9, 9)),
            1e-12);
}

TEST(BlockDiag, SolveBeforeFactorIsContractError) {
  BlockDiagMatrix d(3, 1);
  EXPECT_THROW(d.solve(Vector::Zero(3)), ContractError);
}

TEST(BlockSparse, MatrixMarketExportListsScalars) {
  BlockSparseBuilder b(1, 1, 2, 2);
  b.add(1, 0, RowMajorMatrix::Constant(1, 1, 2.5));
  std::ostringstream out;
  std::move(b).build().write_matrix_market(out);
  EXPECT_NE(out.str().find("%%MatrixMarket"), std::string::npos);
  EXPECT_NE(out.str().find("2 1 2.5"), std::string::npos);
}

}  // namespace
}  // namespace mgba
