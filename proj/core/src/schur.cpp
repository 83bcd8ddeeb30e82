// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#include "mgba/schur.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <numeric>
#include <string>

#include "mgba/error.hpp"

namespace mgba {
namespace {

using Mat93 = Eigen::Matrix<double, kCameraSize, kPointSize, Eigen::RowMajor>;
using Mat99 = Eigen::Matrix<double, kCameraSize, kCameraSize, Eigen::RowMajor>;
using Mat33 = Eigen::Matrix<double, kPointSize, kPointSize, Eigen::RowMajor>;

Eigen::Map<const Mat93> w_block(const BlockSparseMatrix& w, Index k) {
  return Eigen::Map<const Mat93>(w.values().data() + k * kCameraSize * kPointSize);
}

Mat33 c_inverse(const BlockDiagMatrix& c, Index p) {
  const Mat33 block = Eigen::Map<const Mat33>(c.block(p).data());
  return block.inverse();
}

}  // namespace

Damping Damping::from_evaluation(const Evaluation& eval, double mu) {
  if (!(mu > 0.0)) throw ContractError("Damping: mu must be positive");
  Damping d;
  d.mu = mu;
  const Index nc = eval.num_cameras;
  d.diagonal = Vector::Zero(kCameraSize * nc + kPointSize * eval.num_points);
  for (const auto& jb : eval.blocks) {
    d.diagonal.segment<kCameraSize>(kCameraSize * jb.camera) += jb.F.colwise().squaredNorm().transpose();
    d.diagonal.segment<kPointSize>(kCameraSize * nc + kPointSize * jb.point) +=
        jb.E.colwise().squaredNorm().transpose();
  }
  d.diagonal = d.diagonal.cwiseMax(kMinDiagonal).cwiseMin(kMaxDiagonal) / mu;
  return d;
}

SchurPattern::SchurPattern(Index n_cameras, Index n_points, std::span<const JacobianBlock> blocks)
    : n_cameras_(n_cameras), n_points_(n_points) {
  std::vector<std::pair<Index, Index>> pairs;
  pairs.reserve(blocks.size());
  for (const auto& b : blocks) pairs.emplace_back(b.camera, b.point);
  build(std::move(pairs));
}

SchurPattern::SchurPattern(Index n_cameras, Index n_points, std::span<const Observation> observations)
    : n_cameras_(n_cameras), n_points_(n_points) {
  std::vector<std::pair<Index, Index>> pairs;
  pairs.reserve(observations.size());
  for (const auto& o : observations) pairs.emplace_back(o.camera, o.point);
  build(std::move(pairs));
}

void SchurPattern::build(std::vector<std::pair<Index, Index>> pairs) {
  std::sort(pairs.begin(), pairs.end());
  if (std::adjacent_find(pairs.begin(), pairs.end()) != pairs.end()) {
    throw ContractError("SchurPattern: duplicate camera/point observation");
  }
  std::vector<Index> w_offsets(static_cast<std::size_t>(n_cameras_ + 1), 0);
  std::vector<Index> w_cols;
  w_cols.reserve(pairs.size());
  for (const auto& [c, p] : pairs) {
    if (c < 0 || c >= n_cameras_ || p < 0 || p >= n_points_) {
      throw ContractError("SchurPattern: observation index out of range");
    }
    ++w_offsets[static_cast<std::size_t>(c + 1)];
    w_cols.push_back(p);
  }
  std::partial_sum(w_offsets.begin(), w_offsets.end(), w_offsets.begin());
  const std::size_t nnz = w_cols.size();
  w_pattern_ = BlockSparseMatrix(kCameraSize, kPointSize, n_cameras_, n_points_, std::move(w_offsets),
                                 std::move(w_cols),
                                 std::vector<double>(nnz * kCameraSize * kPointSize, 0.0));

  // Point -> (camera, W block) lists, cameras ascending.
  point_offsets_.assign(static_cast<std::size_t>(n_points_ + 1), 0);
  for (Index p : w_pattern_.block_col_indices()) ++point_offsets_[static_cast<std::size_t>(p + 1)];
  std::partial_sum(point_offsets_.begin(), point_offsets_.end(), point_offsets_.begin());
  point_entries_.resize(nnz);
  std::vector<Index> cursor(point_offsets_.begin(), point_offsets_.end() - 1);
  for (Index c = 0; c < n_cameras_; ++c) {
    const auto offsets = w_pattern_.block_row_offsets();
    for (Index k = offsets[static_cast<std::size_t>(c)]; k < offsets[static_cast<std::size_t>(c + 1)]; ++k) {
      const Index p = w_pattern_.block_col_indices()[static_cast<std::size_t>(k)];
      point_entries_[static_cast<std::size_t>(cursor[static_cast<std::size_t>(p)]++)] = {c, k};
    }
  }

  // Covisibility pattern of S.
  std::vector<Index> s_offsets(static_cast<std::size_t>(n_cameras_ + 1), 0);
  std::vector<Index> s_cols;
  std::vector<Index> marker(static_cast<std::size_t>(n_cameras_), -1);
  std::vector<Index> row;
  for (Index c = 0; c < n_cameras_; ++c) {
    row.clear();
    marker[static_cast<std::size_t>(c)] = c;
    row.push_back(c);
    for (Index p : w_pattern_.row_columns(c)) {
      for (const auto& e : point_cameras(p)) {
        if (marker[static_cast<std::size_t>(e.camera)] != c) {
          marker[static_cast<std::size_t>(e.camera)] = c;
          row.push_back(e.camera);
        }
      }
    }
    std::sort(row.begin(), row.end());
    s_cols.insert(s_cols.end(), row.begin(), row.end());
    s_offsets[static_cast<std::size_t>(c + 1)] = static_cast<Index>(s_cols.size());
  }
  const std::size_t s_nnz = s_cols.size();
  s_pattern_ = BlockSparseMatrix(kCameraSize, kCameraSize, n_cameras_, n_cameras_, std::move(s_offsets),
                                 std::move(s_cols),
                                 std::vector<double>(s_nnz * kCameraSize * kCameraSize, 0.0));

  pair_offsets_.assign(static_cast<std::size_t>(n_points_ + 1), 0);
  for (Index p = 0; p < n_points_; ++p) {
    const auto deg = static_cast<Index>(point_cameras(p).size());
    pair_offsets_[static_cast<std::size_t>(p + 1)] = pair_offsets_[static_cast<std::size_t>(p)] + deg * (deg + 1);
  }
  pair_blocks_.resize(static_cast<std::size_t>(pair_offsets_.back()));
  std::size_t out = 0;
  for (Index p = 0; p < n_points_; ++p) {
    const auto entries = point_cameras(p);
    for (std::size_t a = 0; a < entries.size(); ++a) {
      const Index ca = entries[a].camera;
      const auto row = s_pattern_.row_columns(ca);
      const Index row_start = s_pattern_.block_row_offsets()[static_cast<std::size_t>(ca)];
      for (std::size_t b = a; b < entries.size(); ++b) {
        const Index cb = entries[b].camera;
        const auto it = std::lower_bound(row.begin(), row.end(), cb);
        pair_blocks_[out++] = row_start + static_cast<Index>(it - row.begin());
        pair_blocks_[out++] = *s_pattern_.find(cb, ca);
      }
    }
  }
}

std::span<const Index> SchurPattern::point_pair_blocks(Index point) const {
  const auto begin = static_cast<std::size_t>(pair_offsets_[static_cast<std::size_t>(point)]);
  const auto end = static_cast<std::size_t>(pair_offsets_[static_cast<std::size_t>(point + 1)]);
  return std::span<const Index>(pair_blocks_).subspan(begin, end - begin);
}

std::span<const SchurPattern::PointEntry> SchurPattern::point_cameras(Index point) const {
  const auto begin = static_cast<std::size_t>(point_offsets_[static_cast<std::size_t>(point)]);
  const auto end = static_cast<std::size_t>(point_offsets_[static_cast<std::size_t>(point + 1)]);
  return std::span<const PointEntry>(point_entries_).subspan(begin, end - begin);
}

std::string_view to_string(ProductMode mode) {
  return mode == ProductMode::explicit_schur ? "explicit" : "implicit";
}

SchurSystem build_system(const Evaluation& eval, const Damping& damping,
                         std::shared_ptr<const SchurPattern> pattern) {
  if (eval.blocks.empty()) throw ContractError("build_system: empty Jacobian");
  const Index nc = eval.num_cameras;
  const Index np = eval.num_points;
  if (!pattern) pattern = std::make_shared<const SchurPattern>(nc, np, std::span(eval.blocks));
  if (pattern->num_cameras() != nc || pattern->num_points() != np) {
    throw DimensionError("build_system: pattern cameras", static_cast<std::size_t>(nc),
                         static_cast<std::size_t>(pattern->num_cameras()));
  }
  if (damping.diagonal.size() != kCameraSize * nc + kPointSize * np) {
    throw DimensionError("build_system: damping diagonal",
                         static_cast<std::size_t>(kCameraSize * nc + kPointSize * np),
                         static_cast<std::size_t>(damping.diagonal.size()));
  }

  SchurSystem sys;
  sys.pattern = pattern;
  sys.A = BlockDiagMatrix(kCameraSize, nc);
  sys.C = BlockDiagMatrix(kPointSize, np);
  sys.W = BlockSparseMatrix::zeros_like(pattern->w_pattern());
  sys.gradient = Vector::Zero(kCameraSize * nc + kPointSize * np);

  for (const auto& jb : eval.blocks) {
    sys.A.block(jb.camera).noalias() += jb.F.transpose() * jb.F;
    sys.C.block(jb.point).noalias() += jb.E.transpose() * jb.E;
    const auto k = pattern->w_pattern().find(jb.camera, jb.point);
    if (!k) throw ContractError("build_system: observation missing from pattern");
    sys.W.block(*k).noalias() += jb.F.transpose() * jb.E;
    sys.gradient.segment<kCameraSize>(kCameraSize * jb.camera).noalias() -= jb.F.transpose() * jb.residual;
    sys.gradient.segment<kPointSize>(kCameraSize * nc + kPointSize * jb.point).noalias() -=
        jb.E.transpose() * jb.residual;
  }
  for (Index i = 0; i < nc; ++i) {
    sys.A.block(i).diagonal() += damping.diagonal.segment<kCameraSize>(kCameraSize * i);
  }
  for (Index j = 0; j < np; ++j) {
    sys.C.block(j).diagonal() += damping.diagonal.segment<kPointSize>(kCameraSize * nc + kPointSize * j);
  }
  try {
    sys.C.factor();
  } catch (const IndefiniteBlockError& e) {
    throw IndefiniteBlockError("build_system: point block C", e.block_index());
  }

  const Vector g_c = sys.gradient.head(kCameraSize * nc);
  sys.grad_pt = sys.gradient.tail(kPointSize * np);
  sys.rhs_cam = g_c;
  sys.W.multiply_add(sys.C.solve(sys.grad_pt), sys.rhs_cam, -1.0);
  sys.mode = choose_mode(sys);
  return sys;
}

BlockSparseMatrix schur_explicit(const SchurSystem& sys) {
  const SchurPattern& pat = *sys.pattern;
  BlockSparseMatrix s = BlockSparseMatrix::zeros_like(pat.s_pattern());
  for (Index i = 0; i < sys.num_cameras(); ++i) {
    s.block(*s.find(i, i)) = sys.A.block(i);
  }
  double* values = const_cast<double*>(s.values().data());
  auto s_block = [values](Index k) { return Eigen::Map<Mat99>(values + k * kCameraSize * kCameraSize); };
  std::vector<Mat93> y;
  for (Index p = 0; p < sys.num_points(); ++p) {
    const auto entries = pat.point_cameras(p);
    const auto pairs = pat.point_pair_blocks(p);
    const Mat33 c_inv = c_inverse(sys.C, p);
    y.resize(entries.size());
    for (std::size_t a = 0; a < entries.size(); ++a) {
      y[a].noalias() = w_block(sys.W, entries[a].w_block) * c_inv;
    }
    std::size_t k = 0;
    for (std::size_t a = 0; a < entries.size(); ++a) {
      for (std::size_t b = a; b < entries.size(); ++b, k += 2) {
        const Mat99 blk = y[a] * w_block(sys.W, entries[b].w_block).transpose();
        s_block(pairs[k]) -= blk;
        if (a != b) s_block(pairs[k + 1]) -= blk.transpose();
      }
    }
  }
  return s;
}

void ensure_explicit(SchurSystem& sys) {
  if (!sys.S_explicit) sys.S_explicit = schur_explicit(sys);
}

Vector schur_implicit_matvec(const SchurSystem& sys, const Vector& x) {
  if (x.size() != kCameraSize * sys.num_cameras()) {
    throw DimensionError("schur_implicit_matvec", static_cast<std::size_t>(kCameraSize * sys.num_cameras()),
                         static_cast<std::size_t>(x.size()));
  }
  Vector y = sys.A.multiply(x);
  Vector z = sys.W.transpose_multiply(x);
  sys.C.solve_in_place(z);
  sys.W.multiply_add(z, y, -1.0);
  return y;
}

void schur_apply(const SchurSystem& sys, const Vector& x, Vector& y) {
  if (sys.mode == ProductMode::explicit_schur && sys.S_explicit) {
    y = sys.S_explicit->multiply(x);
  } else {
    y = schur_implicit_matvec(sys, x);
  }
}

ProductCost product_costs(const SchurSystem& sys) {
  ProductCost cost;
  const double nnz_s = static_cast<double>(sys.pattern->s_pattern().num_scalar_nonzeros());
  const double nnz_a = static_cast<double>(sys.num_cameras()) * kCameraSize * kCameraSize;
  const double nnz_c = static_cast<double>(sys.num_points()) * kPointSize * kPointSize;
  const double nnz_w = static_cast<double>(sys.W.num_scalar_nonzeros());
  cost.explicit_flops = 2.0 * nnz_s;
  cost.implicit_flops = 2.0 * (nnz_a + 2.0 * nnz_w + nnz_c);
  return cost;
}

ProductMode choose_mode(const ProductCost& cost) {
  return cost.explicit_flops <= cost.implicit_flops ? ProductMode::explicit_schur
                                                    : ProductMode::implicit_schur;
}

ProductMode choose_mode(const SchurSystem& sys) { return choose_mode(product_costs(sys)); }

Vector back_substitute(const SchurSystem& sys, const Vector& delta_cam) {
  Vector rhs = sys.grad_pt;
  sys.W.transpose_multiply_add(delta_cam, rhs, -1.0);
  sys.C.solve_in_place(rhs);
  return rhs;
}

BlockDiagMatrix schur_diagonal(const SchurSystem& sys) {
  BlockDiagMatrix d(kCameraSize, sys.num_cameras());
  for (Index i = 0; i < sys.num_cameras(); ++i) d.block(i) = sys.A.block(i);
  const SchurPattern& pat = *sys.pattern;
  for (Index p = 0; p < sys.num_points(); ++p) {
    const Mat33 c_inv = c_inverse(sys.C, p);
    for (const auto& e : pat.point_cameras(p)) {
      const auto w = w_block(sys.W, e.w_block);
      Eigen::Map<Mat99>(d.block(e.camera).data()).noalias() -= w * c_inv * w.transpose();
    }
  }
  return d;
}

}  // namespace mgba
