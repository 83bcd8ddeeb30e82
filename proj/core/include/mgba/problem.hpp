// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MGBA_PROBLEM_HPP
#define MGBA_PROBLEM_HPP

#include <Eigen/Core>

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mgba/blockmat.hpp"

namespace mgba {

inline constexpr int kCameraSize = 9;
inline constexpr int kPointSize = 3;
/// 7 similarity-gauge modes followed by 9 per-parameter constants.
inline constexpr int kNullspaceSize = 16;
inline constexpr int kGaugeModes = 7;

// Nine-parameter camera: angle-axis rotation, translation, focal length and
// two radial distortion coefficients, in that order. A world point X maps to
// p_cam = R X + t and is imaged at
//   p = -(p_cam.x, p_cam.y) / p_cam.z
//   pixel = focal * (1 + k1 |p|^2 + k2 |p|^4) * p.
struct Camera {
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double focal = 1.0;
  double k1 = 0.0;
  double k2 = 0.0;

  Eigen::Matrix<double, kCameraSize, 1> params() const;
  static Camera from_params(const Eigen::Ref<const Eigen::Matrix<double, kCameraSize, 1>>& p);
  /// Camera center in world coordinates, -R^T t.
  Eigen::Vector3d center() const;
};

struct Point3 {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

struct Observation {
  Index camera = 0;
  Index point = 0;
  Eigen::Vector2d measured = Eigen::Vector2d::Zero();
};

enum class LossKind { trivial, huber };

std::string_view to_string(LossKind loss);
LossKind parse_loss(std::string_view name);

struct BundleProblem {
  std::vector<Camera> cameras;
  std::vector<Point3> points;
  std::vector<Observation> observations;
  LossKind loss = LossKind::trivial;

  Index num_cameras() const { return static_cast<Index>(cameras.size()); }
  Index num_points() const { return static_cast<Index>(points.size()); }
  Index num_observations() const { return static_cast<Index>(observations.size()); }
  Index num_parameters() const { return kCameraSize * num_cameras() + kPointSize * num_points(); }

  /// Stacked [cameras | points] parameter vector.
  Vector parameters() const;
  /// Inverse of parameters(); rotations are canonicalized.
  void set_parameters(const Vector& x);

  /// Throws ContractError on out-of-range indices or duplicate pairs.
  void validate() const;
  /// Human-readable list of soft-invariant violations (cameras without
  /// observations, points seen by fewer than two cameras).
  std::vector<std::string> structural_warnings() const;
};

/// Pixel projection of a world point. Throws BehindCameraError when the point
/// lies on the camera plane.
Eigen::Vector2d project(const Camera& camera, const Point3& point);

/// project(camera, point) - measured.
Eigen::Vector2d residual(const Camera& camera, const Point3& point, const Observation& obs);

/// Huber loss on a squared residual norm: s below the knee at 1, 2 sqrt(s) - 1
/// above. Throws ContractError for s < 0.
double huber(double s);
/// d huber / d s.
double huber_derivative(double s);

double apply_loss(LossKind loss, double s);
double loss_derivative(LossKind loss, double s);

// Linearization of one observation. F and E are the Jacobians of the
// loss-weighted residual sqrt(rho'(s)) f with respect to the camera and point.
struct JacobianBlock {
  Index camera = 0;
  Index point = 0;
  Eigen::Matrix<double, 2, kCameraSize> F;
  Eigen::Matrix<double, 2, kPointSize> E;
  /// Weighted residual sqrt(rho'(s)) f.
  Eigen::Vector2d residual;
  /// sqrt(rho'(s)).
  double weight = 1.0;
};

struct Evaluation {
  double objective = 0.0;
  Index num_cameras = 0;
  Index num_points = 0;
  std::vector<JacobianBlock> blocks;
};

/// Analytic Jacobians of the projection for one observation (unweighted).
/// Returns the raw residual.
Eigen::Vector2d linearize(const Camera& camera, const Point3& point, const Observation& obs,
                          Eigen::Matrix<double, 2, kCameraSize>* dcam,
                          Eigen::Matrix<double, 2, kPointSize>* dpoint);

/// Objective sum_i loss(|f_i|^2) and the Jacobian blocks. Throws
/// BehindCameraError listing every offending observation.
Evaluation evaluate(const BundleProblem& problem);

/// Objective only.
double evaluate_objective(const BundleProblem& problem);

/// Camera-space near-nullspace (9 n_cameras x 16): 3 translations, 3
/// rotations, 1 scale, then 9 per-parameter constant columns.
DenseTall gauge_nullspace(const BundleProblem& problem);

/// Point-space motion (3 n_points x 7) matching the 7 gauge columns of
/// gauge_nullspace; stacking both gives a null vector of J.
DenseTall gauge_point_motion(const BundleProblem& problem);

}  // namespace mgba

#endif  // MGBA_PROBLEM_HPP
