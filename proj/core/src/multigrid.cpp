// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#include "mgba/multigrid.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>

#include "mgba/error.hpp"
#include "mgba/random.hpp"

namespace mgba {

Prolongation build_prolongation(const Aggregation& agg, const DenseTall& k, int block_size) {
  const Index n_fine = static_cast<Index>(agg.assignment.size());
  if (k.rows() != n_fine * block_size) {
    throw DimensionError("build_prolongation: nullspace rows", static_cast<std::size_t>(n_fine * block_size),
                         static_cast<std::size_t>(k.rows()));
  }
  const Index nk = k.cols();
  const auto members = agg.members();
  Prolongation out;
  out.K_coarse = DenseTall::Zero(agg.n_aggregates * nk, nk);

  // Block a of row i holds Q rows for node i; every fine row has exactly one block.
  std::vector<Index> offsets(static_cast<std::size_t>(n_fine + 1));
  std::vector<Index> cols(static_cast<std::size_t>(n_fine));
  for (Index i = 0; i < n_fine; ++i) {
    offsets[static_cast<std::size_t>(i)] = i;
    cols[static_cast<std::size_t>(i)] = agg.assignment[static_cast<std::size_t>(i)];
  }
  offsets[static_cast<std::size_t>(n_fine)] = n_fine;
  std::vector<double> values(static_cast<std::size_t>(n_fine * block_size * nk), 0.0);

  for (Index a = 0; a < agg.n_aggregates; ++a) {
    const auto& m = members[static_cast<std::size_t>(a)];
    const Index rows = block_size * static_cast<Index>(m.size());
    DenseMatrix k_agg(rows, nk);
    for (std::size_t r = 0; r < m.size(); ++r) {
      k_agg.middleRows(block_size * static_cast<Index>(r), block_size) = k.middleRows(block_size * m[r], block_size);
    }
    const Eigen::HouseholderQR<DenseMatrix> qr(k_agg);
    const Index rank = std::min(rows, nk);
    const DenseMatrix q = qr.householderQ() * DenseMatrix::Identity(rows, rank);
    out.K_coarse.block(nk * a, 0, rank, nk) =
        qr.matrixQR().topRows(rank).template triangularView<Eigen::Upper>();
    for (Index c = rank; c < nk; ++c) out.padded_dofs.push_back(nk * a + c);
    for (std::size_t r = 0; r < m.size(); ++r) {
      Eigen::Map<RowMajorMatrix> blk(values.data() + m[r] * block_size * nk, block_size, nk);
      blk.leftCols(rank) = q.middleRows(block_size * static_cast<Index>(r), block_size);
    }
  }
  out.P = BlockSparseMatrix(block_size, static_cast<int>(nk), n_fine, agg.n_aggregates, std::move(offsets),
                            std::move(cols), std::move(values));
  return out;
}

double estimate_lambda_max(const LinearOperator& a, const PointBlockJacobi& d, int steps, std::uint64_t seed) {
  const Index n = d.diagonal().rows();
  if (n == 0) return 0.0;
  const BlockDiagMatrix& dm = d.diagonal();
  Rng rng(seed);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.uniform(-1.0, 1.0);
  v /= std::sqrt(v.dot(dm.multiply(v)));

  std::vector<Vector> basis;
  std::vector<Vector> d_basis;
  std::vector<double> alpha;
  std::vector<double> beta;
  Vector av;
  Vector u;
  double best = 0.0;
  for (int j = 0; j < steps; ++j) {
    basis.push_back(v);
    d_basis.push_back(dm.multiply(v));
    a(v, av);
    alpha.push_back(av.dot(v));
    u = av;
    d.apply(av, u);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < basis.size(); ++k) u -= u.dot(d_basis[k]) * basis[k];
    }
    const double b = std::sqrt(std::max(0.0, u.dot(dm.multiply(u))));

    const auto m = static_cast<Index>(alpha.size());
    DenseMatrix t = DenseMatrix::Zero(m, m);
    for (Index i = 0; i < m; ++i) {
      t(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    best = Eigen::SelfAdjointEigenSolver<DenseMatrix>(t, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();

    const double scale = std::max(std::abs(best), std::numeric_limits<double>::min());
    if (!(b > 1e-12 * scale)) break;
    beta.push_back(b);
    v = u / b;
  }
  return best;
}

ChebyshevSmoother::ChebyshevSmoother(PointBlockJacobi jacobi, double lambda_max, int iterations,
                                     double lower_ratio, double upper_ratio)
    : jacobi_(std::move(jacobi)),
      lambda_max_(lambda_max),
      lower_(lower_ratio * lambda_max),
      upper_(upper_ratio * lambda_max),
      iterations_(iterations) {
  if (!(lower_ > 0.0) || !(upper_ > lower_)) {
    throw ContractError("ChebyshevSmoother: need 0 < lower < upper");
  }
  if (iterations_ < 1) throw ContractError("ChebyshevSmoother: need at least one iteration");
}

void ChebyshevSmoother::smooth(const LinearOperator& a, Vector& x, const Vector& b, bool zero_guess) const {
  const double theta = 0.5 * (upper_ + lower_);
  const double delta = 0.5 * (upper_ - lower_);
  const double sigma = theta / delta;
  double rho = 1.0 / sigma;

  Vector r;
  Vector tmp;
  if (zero_guess) {
    x = Vector::Zero(b.size());
    r = b;
  } else {
    a(x, tmp);
    r = b - tmp;
  }
  Vector z;
  jacobi_.apply(r, z);
  Vector d = z / theta;
  for (int k = 0; k < iterations_; ++k) {
    x += d;
    if (k + 1 == iterations_) break;
    a(d, tmp);
    r -= tmp;
    jacobi_.apply(r, z);
    const double rho_next = 1.0 / (2.0 * sigma - rho);
    d = (rho_next * rho) * d + (2.0 * rho_next / delta) * z;
    rho = rho_next;
  }
}

MgHierarchy::MgHierarchy(const SchurSystem& sys, const DenseTall& k, const MgOptions& options)
    : sys_(&sys), options_(options) {
  if (!sys.S_explicit) throw ContractError("MgHierarchy: the Schur system needs S_explicit");
  if (k.rows() != kCameraSize * sys.num_cameras()) {
    throw DimensionError("MgHierarchy: nullspace rows", static_cast<std::size_t>(kCameraSize * sys.num_cameras()),
                         static_cast<std::size_t>(k.rows()));
  }
  MgLevel fine;
  fine.block_size = kCameraSize;
  fine.n_blocks = sys.num_cameras();
  fine.K = k;
  fine.mode = sys.mode;
  levels_.push_back(std::move(fine));

  // Flops of one product on the current level in its chosen representation.
  const ProductCost fine_cost = product_costs(sys);
  double apply_cost = sys.mode == ProductMode::explicit_schur ? fine_cost.explicit_flops : fine_cost.implicit_flops;

  for (;;) {
    MgLevel& cur = levels_.back();
    const Index l = num_levels() - 1;
    if (cur.scalar_dim() <= options_.coarse_size) break;
    const BlockSparseMatrix& a = l == 0 ? *sys.S_explicit : *cur.op;
    const StrengthMatrix g = l == 0 ? visibility_strength(*sys.pattern) : block_strength(a);
    Aggregation agg = aggregate(g, options_.max_aggregate_size);
    const double ratio = static_cast<double>(agg.n_aggregates) / static_cast<double>(cur.n_blocks);
    if (ratio > options_.max_coarsening_ratio) break;
    Prolongation pr = build_prolongation(agg, cur.K, cur.block_size);
    const Index nk = pr.K_coarse.cols();
    if (agg.n_aggregates * nk >= cur.scalar_dim()) break;

    cur.R = pr.P.transpose();
    BlockSparseMatrix coarse_op = triple_product(cur.R, a, pr.P);
    for (Index dof : pr.padded_dofs) {
      const Index blk = dof / nk;
      const Index local = dof % nk;
      coarse_op.block(*coarse_op.find(blk, blk))(local, local) = 1.0;
    }
    cur.P = std::move(pr.P);
    cur.aggregation = std::move(agg);

    MgLevel next;
    next.block_size = static_cast<int>(nk);
    next.n_blocks = cur.aggregation.n_aggregates;
    next.K = std::move(pr.K_coarse);
    const double explicit_cost = 2.0 * static_cast<double>(coarse_op.num_scalar_nonzeros());
    const double implicit_cost = apply_cost + 4.0 * static_cast<double>(cur.P.num_scalar_nonzeros());
    next.mode = (!options_.allow_implicit_coarse || explicit_cost <= implicit_cost) ? ProductMode::explicit_schur
                                                                                    : ProductMode::implicit_schur;
    // The padded unit diagonal only lives on the explicit matrix.
    if (!pr.padded_dofs.empty()) next.mode = ProductMode::explicit_schur;
    apply_cost = next.mode == ProductMode::explicit_schur ? explicit_cost : implicit_cost;
    next.op = std::move(coarse_op);
    levels_.push_back(std::move(next));
  }

  for (Index l = 0; l + 1 < num_levels(); ++l) {
    MgLevel& cur = levels_[static_cast<std::size_t>(l)];
    PointBlockJacobi jacobi = l == 0 ? PointBlockJacobi::from_matrix(*sys.S_explicit)
                                     : PointBlockJacobi::from_matrix(*cur.op);
    const double lambda = estimate_lambda_max(level_operator(l), jacobi, options_.lanczos_steps, options_.seed);
    cur.smoother.emplace(std::move(jacobi), lambda, options_.smoothing_steps, options_.chebyshev_lower,
                         options_.chebyshev_upper);
  }

  const Index last = num_levels() - 1;
  const DenseMatrix dense = last == 0 ? sys.S_explicit->to_dense() : levels_.back().op->to_dense();
  coarse_.compute(dense);
  if (coarse_.info() != Eigen::Success) {
    throw IndefiniteBlockError("MgHierarchy: coarsest level", static_cast<std::size_t>(last));
  }
}

std::vector<MgLevelStats> MgHierarchy::stats() const {
  std::vector<MgLevelStats> out;
  for (Index l = 0; l < num_levels(); ++l) {
    const MgLevel& lv = level(l);
    MgLevelStats s;
    s.n_blocks = lv.n_blocks;
    s.block_size = lv.block_size;
    s.scalar_dim = lv.scalar_dim();
    s.nnz_blocks = l == 0 ? sys_->S_explicit->num_blocks() : lv.op->num_blocks();
    s.mode = lv.mode;
    s.mean_aggregate_size = lv.aggregation.mean_size();
    s.lambda_max = lv.smoother ? lv.smoother->lambda_max() : 0.0;
    out.push_back(s);
  }
  return out;
}

void MgHierarchy::level_apply(Index l, const Vector& x, Vector& y) const {
  const MgLevel& lv = level(l);
  if (l == 0) {
    schur_apply(*sys_, x, y);
  } else if (lv.mode == ProductMode::explicit_schur) {
    y = lv.op->multiply(x);
  } else {
    const MgLevel& fine = level(l - 1);
    Vector fx;
    level_apply(l - 1, fine.P.multiply(x), fx);
    y = fine.R.multiply(fx);
  }
}

LinearOperator MgHierarchy::level_operator(Index l) const {
  return [this, l](const Vector& x, Vector& y) { level_apply(l, x, y); };
}

void MgHierarchy::mgcycle(Index l, Vector& x, const Vector& b) const { mgcycle_impl(l, x, b, false); }

void MgHierarchy::apply(const Vector& r, Vector& z) const {
  if (r.size() != level(0).scalar_dim()) {
    throw DimensionError("MgHierarchy::apply", static_cast<std::size_t>(level(0).scalar_dim()),
                         static_cast<std::size_t>(r.size()));
  }
  mgcycle_impl(0, z, r, true);
}

void MgHierarchy::mgcycle_impl(Index l, Vector& x, const Vector& b, bool zero_guess) const {
  if (l == num_levels() - 1) {
    x = coarse_.solve(b);
    return;
  }
  const MgLevel& lv = level(l);
  const LinearOperator a = level_operator(l);
  lv.smoother->smooth(a, x, b, zero_guess);
  Vector ax;
  a(x, ax);
  const Vector rc = lv.R.multiply(b - ax);
  Vector xc = Vector::Zero(rc.size());
  mgcycle_impl(l + 1, xc, rc, true);
  lv.P.multiply_add(xc, x);
  lv.smoother->smooth(a, x, b, false);
}

}  // namespace mgba
