// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MGBA_TESTS_ORACLES_HPP
#define MGBA_TESTS_ORACLES_HPP

#include <Eigen/Core>

#include <cstdint>
#include <functional>

#include "mgba/blockmat.hpp"
#include "mgba/problem.hpp"
#include "mgba/schur.hpp"
#include "mgba/solver.hpp"
#include "mgba/synth.hpp"

namespace mgba::testing {

// Straight-line re-implementation of the camera model (Rodrigues by cross
// products, no shared helpers) used as an independent reference.
Eigen::Vector2d reference_project(const Eigen::Matrix<double, kCameraSize, 1>& camera,
                                  const Eigen::Vector3d& point);

/// Stacked raw residuals of every observation from reference_project.
Vector reference_residuals(const BundleProblem& problem, const Vector& x);

/// Dense Jacobian of reference_residuals by central differences.
DenseMatrix finite_difference_jacobian(const BundleProblem& problem, const Vector& x, double step = 1e-6);

/// Random well-posed problem: cameras on the +z side looking down -z at a
/// unit cube of points, each point seen by at least two cameras.
BundleProblem random_problem(std::uint64_t seed, Index n_cameras, Index n_points, double pixel_noise = 1.0,
                             LossKind loss = LossKind::huber);

/// Small synthetic city problem with few points, quick to solve.
SyntheticSpec small_city_spec(Index blocks_x, Index blocks_y, std::uint64_t seed, Index n_points = 400);

struct DenseNormalEquations {
  /// Weighted Jacobian, observations stacked in order.
  DenseMatrix J;
  /// Weighted residuals.
  Vector f;
  /// J^T J + D.
  DenseMatrix H;
  /// -J^T f.
  Vector g;
  Vector damping;
};

/// Dense assembly from the Jacobian blocks of an evaluation.
DenseNormalEquations dense_normal_equations(const Evaluation& eval, double mu);

/// H_cc - H_cp H_pp^{-1} H_pc.
DenseMatrix dense_schur(const DenseMatrix& h, Index n_camera_dofs);

DenseMatrix random_spd(std::uint64_t seed, Index n, double min_eig = 0.1, double max_eig = 10.0);

/// Dense matrix of a linear operator by applying it to unit vectors.
DenseMatrix densify(const std::function<void(const Vector&, Vector&)>& op, Index n);

double relative_error(const DenseMatrix& a, const DenseMatrix& b);

// f(x) = J x - y with the LM protocol of LeastSquaresModel and a dense solve.
class LinearResidualModel : public LeastSquaresModel {
 public:
  LinearResidualModel(DenseMatrix j, Vector y);

  Vector parameters() const override { return x_; }
  void set_parameters(const Vector& x) override { x_ = x; }
  double linearize() override;
  const Vector& gradient() const override { return g_; }
  double objective_at(const Vector& x) override;
  Vector solve_step(double radius, LinearSolveStats* stats) override;
  double step_energy(const Vector& delta) const override;

  /// argmin |J x - y|^2.
  Vector optimum() const;

 private:
  DenseMatrix j_;
  Vector y_;
  Vector x_;
  Vector g_;
  Vector d_;
};

}  // namespace mgba::testing

#endif  // MGBA_TESTS_ORACLES_HPP
