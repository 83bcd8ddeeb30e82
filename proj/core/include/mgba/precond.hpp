// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MGBA_PRECOND_HPP
#define MGBA_PRECOND_HPP

#include <Eigen/Cholesky>

#include <string_view>
#include <vector>

#include "mgba/aggregation.hpp"
#include "mgba/blockmat.hpp"
#include "mgba/schur.hpp"

namespace mgba {

/// z = M r for a fixed symmetric positive definite M.
class Preconditioner {
 public:
  virtual ~Preconditioner() = default;
  virtual void apply(const Vector& r, Vector& z) const = 0;
};

enum class PreconditionerKind { point_block_jacobi, visibility, multigrid };

std::string_view to_string(PreconditionerKind kind);
/// Accepts "pbj", "visibility" and "multigrid". Throws ContractError.
PreconditionerKind parse_preconditioner(std::string_view name);

class PointBlockJacobi : public Preconditioner {
 public:
  /// Factors a copy of the blocks; throws IndefiniteBlockError.
  explicit PointBlockJacobi(BlockDiagMatrix diagonal);
  /// Diagonal blocks of the Schur complement, from S_explicit when present.
  static PointBlockJacobi from_system(const SchurSystem& sys);
  /// Diagonal blocks of an explicit block matrix.
  static PointBlockJacobi from_matrix(const BlockSparseMatrix& a);

  const BlockDiagMatrix& diagonal() const { return diag_; }
  void apply(const Vector& r, Vector& z) const override;

 private:
  BlockDiagMatrix diag_;
};

/// Camera clusters for the visibility comparator: aggregation with a larger cap.
Aggregation visibility_cluster(const StrengthMatrix& g, Index max_cluster = 100);

// Block Jacobi over camera clusters; each block is the principal submatrix of
// S on the cluster's cameras.
class VisibilityJacobi : public Preconditioner {
 public:
  /// Throws IndefiniteBlockError naming the failing cluster.
  VisibilityJacobi(const SchurSystem& sys, const Aggregation& clusters);

  Index num_clusters() const { return static_cast<Index>(members_.size()); }
  const std::vector<Index>& cluster(Index c) const { return members_[static_cast<std::size_t>(c)]; }
  void apply(const Vector& r, Vector& z) const override;

 private:
  std::vector<std::vector<Index>> members_;
  std::vector<Eigen::LLT<DenseMatrix>> factors_;
};

}  // namespace mgba

#endif  // MGBA_PRECOND_HPP
