// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#include "mgba/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mgba/error.hpp"

namespace mgba {

StrengthMatrix visibility_strength(const SchurPattern& pattern) {
  const Index n = pattern.num_cameras();
  const BlockSparseMatrix& sp = pattern.s_pattern();
  std::vector<double> counts(static_cast<std::size_t>(n), 0.0);
  std::vector<double> shared(static_cast<std::size_t>(sp.num_blocks()), 0.0);
  for (Index p = 0; p < pattern.num_points(); ++p) {
    const auto cams = pattern.point_cameras(p);
    const auto pairs = pattern.point_pair_blocks(p);
    std::size_t k = 0;
    for (std::size_t a = 0; a < cams.size(); ++a) {
      counts[static_cast<std::size_t>(cams[a].camera)] += 1.0;
      for (std::size_t b = a; b < cams.size(); ++b, k += 2) {
        if (a == b) continue;
        shared[static_cast<std::size_t>(pairs[k])] += 1.0;
        shared[static_cast<std::size_t>(pairs[k + 1])] += 1.0;
      }
    }
  }
  for (Index i = 0; i < n; ++i) {
    if (counts[static_cast<std::size_t>(i)] == 0.0) {
      throw ContractError("visibility_strength: camera " + std::to_string(i) + " observes no points");
    }
  }
  const auto offsets = sp.block_row_offsets();
  const auto cols = sp.block_col_indices();
  std::vector<Index> g_offsets(static_cast<std::size_t>(n + 1), 0);
  std::vector<Index> g_cols;
  std::vector<double> g_values;
  g_cols.reserve(cols.size());
  g_values.reserve(cols.size());
  for (Index i = 0; i < n; ++i) {
    for (Index k = offsets[static_cast<std::size_t>(i)]; k < offsets[static_cast<std::size_t>(i + 1)]; ++k) {
      const Index j = cols[static_cast<std::size_t>(k)];
      if (j == i) continue;
      const double denom = std::sqrt(counts[static_cast<std::size_t>(i)] * counts[static_cast<std::size_t>(j)]);
      g_cols.push_back(j);
      g_values.push_back(std::min(1.0, shared[static_cast<std::size_t>(k)] / denom));
    }
    g_offsets[static_cast<std::size_t>(i + 1)] = static_cast<Index>(g_cols.size());
  }
  return BlockSparseMatrix(1, 1, n, n, std::move(g_offsets), std::move(g_cols), std::move(g_values));
}

StrengthMatrix block_strength(const BlockSparseMatrix& a) {
  const Index n = a.n_block_rows();
  std::vector<double> diag(static_cast<std::size_t>(n), 0.0);
  for (Index i = 0; i < n; ++i) {
    if (const auto k = a.find(i, i)) diag[static_cast<std::size_t>(i)] = a.block(*k).norm();
  }
  BlockSparseBuilder builder(1, 1, n, n);
  const auto offsets = a.block_row_offsets();
  const auto cols = a.block_col_indices();
  for (Index i = 0; i < n; ++i) {
    for (Index k = offsets[static_cast<std::size_t>(i)]; k < offsets[static_cast<std::size_t>(i + 1)]; ++k) {
      const Index j = cols[static_cast<std::size_t>(k)];
      if (j == i) continue;
      const double denom = std::sqrt(diag[static_cast<std::size_t>(i)] * diag[static_cast<std::size_t>(j)]);
      const double value = denom > 0.0 ? std::clamp(a.block(k).norm() / denom, 0.0, 1.0) : 0.0;
      if (value > 0.0) builder.add(i, j, RowMajorMatrix::Constant(1, 1, value));
    }
  }
  return std::move(builder).build();
}

std::vector<Index> Aggregation::sizes() const {
  std::vector<Index> out(static_cast<std::size_t>(n_aggregates), 0);
  for (Index a : assignment) ++out[static_cast<std::size_t>(a)];
  return out;
}

double Aggregation::mean_size() const {
  return n_aggregates == 0 ? 0.0 : static_cast<double>(assignment.size()) / static_cast<double>(n_aggregates);
}

std::vector<std::vector<Index>> Aggregation::members() const {
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(n_aggregates));
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    out[static_cast<std::size_t>(assignment[i])].push_back(static_cast<Index>(i));
  }
  return out;
}

Aggregation aggregate(const StrengthMatrix& g, Index max_size) {
  if (g.row_block_size() != 1 || g.col_block_size() != 1 || g.n_block_rows() != g.n_block_cols()) {
    throw ContractError("aggregate: strength matrix must be square with 1x1 blocks");
  }
  if (max_size < 2) throw ContractError("aggregate: max_size must be at least 2");
  const Index n = g.n_block_rows();
  constexpr Index kNone = -1;
  Aggregation agg;
  agg.assignment.assign(static_cast<std::size_t>(n), kNone);
  std::vector<Index> sizes;
  const auto offsets = g.block_row_offsets();
  const auto cols = g.block_col_indices();

  struct Neighbour {
    double strength;
    Index node;
  };
  std::vector<Neighbour> nbrs;
  auto gather = [&](Index i) {
    nbrs.clear();
    for (Index k = offsets[static_cast<std::size_t>(i)]; k < offsets[static_cast<std::size_t>(i + 1)]; ++k) {
      const Index j = cols[static_cast<std::size_t>(k)];
      const double s = g.block(k)(0, 0);
      if (j != i && s > 0.0) nbrs.push_back({s, j});
    }
    std::sort(nbrs.begin(), nbrs.end(), [&](const Neighbour& a, const Neighbour& b) {
      if (a.strength != b.strength) return a.strength > b.strength;
      const bool a_free = agg.assignment[static_cast<std::size_t>(a.node)] == kNone;
      const bool b_free = agg.assignment[static_cast<std::size_t>(b.node)] == kNone;
      if (a_free != b_free) return a_free;
      return a.node < b.node;
    });
  };

  for (Index i = 0; i < n; ++i) {
    if (agg.assignment[static_cast<std::size_t>(i)] != kNone) continue;
    gather(i);
    for (const auto& nb : nbrs) {
      const Index k = agg.assignment[static_cast<std::size_t>(nb.node)];
      if (k == kNone) {
        agg.assignment[static_cast<std::size_t>(i)] = static_cast<Index>(sizes.size());
        agg.assignment[static_cast<std::size_t>(nb.node)] = static_cast<Index>(sizes.size());
        sizes.push_back(2);
        break;
      }
      if (sizes[static_cast<std::size_t>(k)] < max_size) {
        agg.assignment[static_cast<std::size_t>(i)] = k;
        ++sizes[static_cast<std::size_t>(k)];
        break;
      }
    }
  }
  for (Index i = 0; i < n; ++i) {
    if (agg.assignment[static_cast<std::size_t>(i)] != kNone) continue;
    gather(i);
    for (const auto& nb : nbrs) {
      const Index k = agg.assignment[static_cast<std::size_t>(nb.node)];
      if (k != kNone && sizes[static_cast<std::size_t>(k)] <= max_size) {
        agg.assignment[static_cast<std::size_t>(i)] = k;
        ++sizes[static_cast<std::size_t>(k)];
        break;
      }
    }
    if (agg.assignment[static_cast<std::size_t>(i)] == kNone) {
      agg.assignment[static_cast<std::size_t>(i)] = static_cast<Index>(sizes.size());
      sizes.push_back(1);
    }
  }
  agg.n_aggregates = static_cast<Index>(sizes.size());
  return agg;
}

}  // namespace mgba
