// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MGBA_AGGREGATION_HPP
#define MGBA_AGGREGATION_HPP

#include <vector>

#include "mgba/blockmat.hpp"
#include "mgba/schur.hpp"

namespace mgba {

/// Symmetric node-similarity graph with 1x1 blocks, entries in (0, 1], no
/// stored diagonal.
using StrengthMatrix = BlockSparseMatrix;

/// Cosine similarity of the 0/1 camera-point visibility vectors. Throws
/// ContractError if a camera observes no points.
StrengthMatrix visibility_strength(const SchurPattern& pattern);

/// Coarse-level strength ||A_ij||_F / sqrt(||A_ii||_F ||A_jj||_F), clamped to
/// [0, 1].
StrengthMatrix block_strength(const BlockSparseMatrix& a);

struct Aggregation {
  /// Aggregate index of every node.
  std::vector<Index> assignment;
  Index n_aggregates = 0;

  std::vector<Index> sizes() const;
  double mean_size() const;
  /// Member nodes of each aggregate, ascending.
  std::vector<std::vector<Index>> members() const;
};

// Greedy pairwise aggregation. Nodes are visited in index order; an
// unaggregated node scans its neighbours by decreasing strength (ties: an
// unaggregated neighbour first, then the lower index) and either pairs with
// an unaggregated neighbour or joins the first neighbouring aggregate smaller
// than max_size. Nodes left over join the strongest neighbouring aggregate
// that still holds at most max_size nodes; otherwise they become singletons.
Aggregation aggregate(const StrengthMatrix& g, Index max_size = 20);

}  // namespace mgba

#endif  // MGBA_AGGREGATION_HPP
