// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MGBA_SCHUR_HPP
#define MGBA_SCHUR_HPP

#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mgba/blockmat.hpp"
#include "mgba/problem.hpp"

namespace mgba {

/// Levenberg-Marquardt damping with Jacobi scaling:
/// D = clamp(diag(J^T J), 1e-6, 1e32) / mu.
struct Damping {
  double mu = 1e4;
  Vector diagonal;

  static constexpr double kMinDiagonal = 1e-6;
  static constexpr double kMaxDiagonal = 1e32;

  static Damping from_evaluation(const Evaluation& eval, double mu);
};

// Sparsity shared by every linearization of a fixed observation set: the
// camera x point pattern of W, the camera covisibility pattern of S, and the
// per-point list of observing cameras.
class SchurPattern {
 public:
  struct PointEntry {
    Index camera;
    Index w_block;
  };

  SchurPattern(Index n_cameras, Index n_points, std::span<const JacobianBlock> blocks);
  SchurPattern(Index n_cameras, Index n_points, std::span<const Observation> observations);

  Index num_cameras() const { return n_cameras_; }
  Index num_points() const { return n_points_; }
  /// Zero-valued 9x3 skeleton of W.
  const BlockSparseMatrix& w_pattern() const { return w_pattern_; }
  /// Zero-valued 9x9 skeleton of S, cameras i, j stored iff they co-observe
  /// a point (diagonal always present).
  const BlockSparseMatrix& s_pattern() const { return s_pattern_; }
  std::span<const PointEntry> point_cameras(Index point) const;
  /// S block indices of every camera pair (a, b), a <= b, of the point's
  /// observers in point_cameras order: s_block(a, b) then s_block(b, a).
  std::span<const Index> point_pair_blocks(Index point) const;

 private:
  void build(std::vector<std::pair<Index, Index>> pairs);

  Index n_cameras_;
  Index n_points_;
  BlockSparseMatrix w_pattern_;
  BlockSparseMatrix s_pattern_;
  std::vector<Index> point_offsets_;
  std::vector<PointEntry> point_entries_;
  std::vector<Index> pair_offsets_;
  std::vector<Index> pair_blocks_;
};

enum class ProductMode { implicit_schur, explicit_schur };

std::string_view to_string(ProductMode mode);

// Damped normal equations with the points eliminated:
//   S = A - W C^{-1} W^T,  A = F^T F + D_c,  C = E^T E + D_p,  W = F^T E.
// Solving S dc = rhs_cam gives the camera part of the LM step.
struct SchurSystem {
  std::shared_ptr<const SchurPattern> pattern;
  BlockDiagMatrix A;
  /// Factored.
  BlockDiagMatrix C;
  BlockSparseMatrix W;
  std::optional<BlockSparseMatrix> S_explicit;
  /// g_c - W C^{-1} g_p with g = -J^T f.
  Vector rhs_cam;
  /// g_p, kept for back-substitution.
  Vector grad_pt;
  /// Full gradient g = -J^T f (cameras then points).
  Vector gradient;
  ProductMode mode = ProductMode::implicit_schur;

  Index num_cameras() const { return A.n_blocks(); }
  Index num_points() const { return C.n_blocks(); }
};

/// Assembles A, C, W and the reduced right-hand side, factors C, and picks
/// the matvec mode. Throws IndefiniteBlockError naming the point whose C block
/// is singular.
SchurSystem build_system(const Evaluation& eval, const Damping& damping,
                         std::shared_ptr<const SchurPattern> pattern);

/// Explicit S on the covisibility pattern.
BlockSparseMatrix schur_explicit(const SchurSystem& sys);
/// Assembles S_explicit if it is not present yet.
void ensure_explicit(SchurSystem& sys);

/// A x - W (C^{-1} (W^T x)), never forming S.
Vector schur_implicit_matvec(const SchurSystem& sys, const Vector& x);
/// S x using whichever representation sys.mode selects.
void schur_apply(const SchurSystem& sys, const Vector& x, Vector& y);

struct ProductCost {
  double implicit_flops = 0.0;
  double explicit_flops = 0.0;
};

/// Estimated flops per matvec: explicit 2 nnz(S); implicit
/// 2 (nnz(A) + 2 nnz(W) + nnz(C)).
ProductCost product_costs(const SchurSystem& sys);
/// Cheaper mode; ties go to the explicit product.
ProductMode choose_mode(const SchurSystem& sys);
ProductMode choose_mode(const ProductCost& cost);

/// Point update dp = C^{-1} (grad_pt - W^T dc).
Vector back_substitute(const SchurSystem& sys, const Vector& delta_cam);

/// Diagonal blocks S_ii = A_ii - sum_p W_ip C_p^{-1} W_ip^T (unfactored).
BlockDiagMatrix schur_diagonal(const SchurSystem& sys);

}  // namespace mgba

#endif  // MGBA_SCHUR_HPP
