// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MGBA_MULTIGRID_HPP
#define MGBA_MULTIGRID_HPP

#include <Eigen/Cholesky>

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "mgba/aggregation.hpp"
#include "mgba/blockmat.hpp"
#include "mgba/operator.hpp"
#include "mgba/precond.hpp"
#include "mgba/schur.hpp"

namespace mgba {

struct Prolongation {
  /// Fine x coarse, block_size x 16 blocks, one per fine node.
  BlockSparseMatrix P;
  /// Coarse near-nullspace; P * K_coarse == K.
  DenseTall K_coarse;
  /// Coarse dofs whose P column is zero (aggregates with fewer rows than
  /// nullspace columns).
  std::vector<Index> padded_dofs;
};

/// Per-aggregate Householder QR of the restricted nullspace. The Q factor
/// fills the aggregate's block column of P and the R factor its rows of
/// K_coarse.
Prolongation build_prolongation(const Aggregation& agg, const DenseTall& k, int block_size);

/// Largest eigenvalue of D^{-1} A by Lanczos in the D inner product, with
/// full reorthogonalization and a fixed-seed start vector. Stops early on
/// breakdown and returns the best Ritz value found.
double estimate_lambda_max(const LinearOperator& a, const PointBlockJacobi& d, int steps = 5,
                           std::uint64_t seed = 0x5eed);

// Chebyshev polynomial smoother on [lower, upper] of D^{-1} A with D the
// point block Jacobi matrix of the level.
class ChebyshevSmoother {
 public:
  ChebyshevSmoother(PointBlockJacobi jacobi, double lambda_max, int iterations = 2,
                    double lower_ratio = 0.3, double upper_ratio = 1.1);

  double lambda_max() const { return lambda_max_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  int iterations() const { return iterations_; }
  const PointBlockJacobi& jacobi() const { return jacobi_; }

  /// Runs the three-term recurrence from x toward A^{-1} b. With zero_guess
  /// the incoming x is taken to be zero and the first residual is free.
  void smooth(const LinearOperator& a, Vector& x, const Vector& b, bool zero_guess = false) const;

 private:
  PointBlockJacobi jacobi_;
  double lambda_max_;
  double lower_;
  double upper_;
  int iterations_;
};

struct MgOptions {
  Index max_aggregate_size = 20;
  /// Stop coarsening once a level has at most this many scalar dofs.
  Index coarse_size = 400;
  /// Stop coarsening when n_coarse / n_fine (aggregates per node) exceeds this.
  double max_coarsening_ratio = 0.7;
  int smoothing_steps = 2;
  int lanczos_steps = 5;
  double chebyshev_lower = 0.3;
  double chebyshev_upper = 1.1;
  /// Let coarse levels apply their operator through the finer levels when
  /// that is cheaper than the explicit Galerkin matrix.
  bool allow_implicit_coarse = true;
  std::uint64_t seed = 0x5eed;
};

struct MgLevel {
  int block_size = kCameraSize;
  Index n_blocks = 0;
  /// Explicit operator. Empty on level 0, which uses the Schur system.
  std::optional<BlockSparseMatrix> op;
  /// Near-nullspace on this level.
  DenseTall K;
  ProductMode mode = ProductMode::explicit_schur;
  /// Transfer to the next coarser level; empty on the coarsest.
  Aggregation aggregation;
  BlockSparseMatrix P;
  BlockSparseMatrix R;
  std::optional<ChebyshevSmoother> smoother;

  Index scalar_dim() const { return n_blocks * block_size; }
};

struct MgLevelStats {
  Index n_blocks = 0;
  int block_size = 0;
  Index scalar_dim = 0;
  Index nnz_blocks = 0;
  ProductMode mode = ProductMode::explicit_schur;
  double mean_aggregate_size = 0.0;
  double lambda_max = 0.0;
};

// Unsmoothed-aggregation hierarchy over the Schur complement, applied as a
// V-cycle with Chebyshev pre- and post-smoothing and a dense coarsest solve.
// Holds a reference to the system, which must outlive it and carry
// S_explicit.
class MgHierarchy : public Preconditioner {
 public:
  /// Throws ContractError without S_explicit and IndefiniteBlockError when a
  /// smoother block or the coarsest level fails to factor.
  MgHierarchy(const SchurSystem& sys, const DenseTall& k, const MgOptions& options = {});

  Index num_levels() const { return static_cast<Index>(levels_.size()); }
  const MgLevel& level(Index l) const { return levels_[static_cast<std::size_t>(l)]; }
  std::vector<MgLevelStats> stats() const;

  /// y = A_l x in the level's chosen representation.
  void level_apply(Index l, const Vector& x, Vector& y) const;
  LinearOperator level_operator(Index l) const;

  /// One V-cycle on level l improving x for A_l x = b.
  void mgcycle(Index l, Vector& x, const Vector& b) const;
  /// One cycle from a zero guess on level 0.
  void apply(const Vector& r, Vector& z) const override;

 private:
  void mgcycle_impl(Index l, Vector& x, const Vector& b, bool zero_guess) const;

  const SchurSystem* sys_;
  MgOptions options_;
  std::vector<MgLevel> levels_;
  Eigen::LLT<DenseMatrix> coarse_;
};

}  // namespace mgba

#endif  // MGBA_MULTIGRID_HPP
