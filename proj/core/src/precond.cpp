// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#include "mgba/precond.hpp"

#include <string>

#include "mgba/error.hpp"

namespace mgba {

std::string_view to_string(PreconditionerKind kind) {
  switch (kind) {
    case PreconditionerKind::point_block_jacobi:
      return "pbj";
    case PreconditionerKind::visibility:
      return "visibility";
    case PreconditionerKind::multigrid:
      return "multigrid";
  }
  return "unknown";
}

PreconditionerKind parse_preconditioner(std::string_view name) {
  if (name == "pbj" || name == "point_block_jacobi") return PreconditionerKind::point_block_jacobi;
  if (name == "visibility") return PreconditionerKind::visibility;
  if (name == "multigrid" || name == "mg") return PreconditionerKind::multigrid;
  throw ContractError("unknown preconditioner '" + std::string(name) + "'");
}

PointBlockJacobi::PointBlockJacobi(BlockDiagMatrix diagonal) : diag_(std::move(diagonal)) {
  diag_.factor();
}

PointBlockJacobi PointBlockJacobi::from_system(const SchurSystem& sys) {
  if (sys.S_explicit) return from_matrix(*sys.S_explicit);
  return PointBlockJacobi(schur_diagonal(sys));
}

PointBlockJacobi PointBlockJacobi::from_matrix(const BlockSparseMatrix& a) {
  if (a.row_block_size() != a.col_block_size() || a.n_block_rows() != a.n_block_cols()) {
    throw ContractError("PointBlockJacobi: matrix must be square with square blocks");
  }
  BlockDiagMatrix d(a.row_block_size(), a.n_block_rows());
  for (Index i = 0; i < a.n_block_rows(); ++i) {
    const auto k = a.find(i, i);
    if (!k) throw IndefiniteBlockError("PointBlockJacobi: missing diagonal", static_cast<std::size_t>(i));
    d.block(i) = a.block(*k);
  }
  return PointBlockJacobi(std::move(d));
}

void PointBlockJacobi::apply(const Vector& r, Vector& z) const {
  if (r.size() != diag_.rows()) {
    throw DimensionError("PointBlockJacobi::apply", static_cast<std::size_t>(diag_.rows()),
                         static_cast<std::size_t>(r.size()));
  }
  z = r;
  diag_.solve_in_place(z);
}

Aggregation visibility_cluster(const StrengthMatrix& g, Index max_cluster) {
  return aggregate(g, max_cluster);
}

VisibilityJacobi::VisibilityJacobi(const SchurSystem& sys, const Aggregation& clusters)
    : members_(clusters.members()) {
  const Index nc = sys.num_cameras();
  if (static_cast<Index>(clusters.assignment.size()) != nc) {
    throw DimensionError("VisibilityJacobi: cluster assignment", static_cast<std::size_t>(nc),
                         clusters.assignment.size());
  }
  // Position of each camera inside its cluster block.
  std::vector<Index> local(static_cast<std::size_t>(nc), 0);
  std::vector<DenseMatrix> blocks(members_.size());
  for (std::size_t c = 0; c < members_.size(); ++c) {
    const auto& m = members_[c];
    for (std::size_t a = 0; a < m.size(); ++a) local[static_cast<std::size_t>(m[a])] = static_cast<Index>(a);
    blocks[c] = DenseMatrix::Zero(kCameraSize * static_cast<Index>(m.size()),
                                  kCameraSize * static_cast<Index>(m.size()));
  }
  auto cluster_of = [&](Index cam) { return clusters.assignment[static_cast<std::size_t>(cam)]; };

  if (sys.S_explicit) {
    const BlockSparseMatrix& s = *sys.S_explicit;
    const auto offsets = s.block_row_offsets();
    const auto cols = s.block_col_indices();
    for (Index i = 0; i < nc; ++i) {
      for (Index k = offsets[static_cast<std::size_t>(i)]; k < offsets[static_cast<std::size_t>(i + 1)]; ++k) {
        const Index j = cols[static_cast<std::size_t>(k)];
        if (cluster_of(i) != cluster_of(j)) continue;
        blocks[static_cast<std::size_t>(cluster_of(i))].block(
            kCameraSize * local[static_cast<std::size_t>(i)], kCameraSize * local[static_cast<std::size_t>(j)],
            kCameraSize, kCameraSize) = s.block(k);
      }
    }
  } else {
    for (Index i = 0; i < nc; ++i) {
      const Index l = kCameraSize * local[static_cast<std::size_t>(i)];
      blocks[static_cast<std::size_t>(cluster_of(i))].block(l, l, kCameraSize, kCameraSize) = sys.A.block(i);
    }
    const SchurPattern& pat = *sys.pattern;
    for (Index p = 0; p < sys.num_points(); ++p) {
      const auto entries = pat.point_cameras(p);
      const DenseMatrix c_inv = sys.C.block_inverse(p);
      for (const auto& ea : entries) {
        const DenseMatrix y = sys.W.block(ea.w_block) * c_inv;
        for (const auto& eb : entries) {
          if (cluster_of(ea.camera) != cluster_of(eb.camera)) continue;
          blocks[static_cast<std::size_t>(cluster_of(ea.camera))].block(
              kCameraSize * local[static_cast<std::size_t>(ea.camera)],
              kCameraSize * local[static_cast<std::size_t>(eb.camera)], kCameraSize, kCameraSize) -=
              y * sys.W.block(eb.w_block).transpose();
        }
      }
    }
  }
  factors_.reserve(blocks.size());
  for (std::size_t c = 0; c < blocks.size(); ++c) {
    factors_.emplace_back(blocks[c]);
    if (factors_.back().info() != Eigen::Success) {
      throw IndefiniteBlockError("VisibilityJacobi: cluster block", c);
    }
  }
}

void VisibilityJacobi::apply(const Vector& r, Vector& z) const {
  Index n = 0;
  for (const auto& m : members_) n += static_cast<Index>(m.size());
  if (r.size() != kCameraSize * n) {
    throw DimensionError("VisibilityJacobi::apply", static_cast<std::size_t>(kCameraSize * n),
                         static_cast<std::size_t>(r.size()));
  }
  z.resize(r.size());
  Vector local;
  for (std::size_t c = 0; c < members_.size(); ++c) {
    const auto& m = members_[c];
    local.resize(kCameraSize * static_cast<Index>(m.size()));
    for (std::size_t a = 0; a < m.size(); ++a) {
      local.segment<kCameraSize>(kCameraSize * static_cast<Index>(a)) = r.segment<kCameraSize>(kCameraSize * m[a]);
    }
    factors_[c].solveInPlace(local);
    for (std::size_t a = 0; a < m.size(); ++a) {
      z.segment<kCameraSize>(kCameraSize * m[a]) = local.segment<kCameraSize>(kCameraSize * static_cast<Index>(a));
    }
  }
}

}  // namespace mgba
