// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#include "mgba/problem.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>

#include "mgba/error.hpp"
#include "mgba/rotation.hpp"

namespace mgba {

Eigen::Matrix<double, kCameraSize, 1> Camera::params() const {
  Eigen::Matrix<double, kCameraSize, 1> p;
  p << rotation, translation, focal, k1, k2;
  return p;
}

Camera Camera::from_params(const Eigen::Ref<const Eigen::Matrix<double, kCameraSize, 1>>& p) {
  Camera c;
  c.rotation = canonicalize_angle_axis(p.segment<3>(0));
  c.translation = p.segment<3>(3);
  c.focal = p(6);
  c.k1 = p(7);
  c.k2 = p(8);
  return c;
}

Eigen::Vector3d Camera::center() const {
  return -(angle_axis_to_matrix(rotation).transpose() * translation);
}

std::string_view to_string(LossKind loss) {
  return loss == LossKind::huber ? "huber" : "trivial";
}

LossKind parse_loss(std::string_view name) {
  if (name == "huber") return LossKind::huber;
  if (name == "trivial" || name == "none" || name == "squared") return LossKind::trivial;
  throw ContractError("unknown loss '" + std::string(name) + "'");
}

Vector BundleProblem::parameters() const {
  Vector x(num_parameters());
  for (Index i = 0; i < num_cameras(); ++i) {
    x.segment<kCameraSize>(kCameraSize * i) = cameras[static_cast<std::size_t>(i)].params();
  }
  const Index off = kCameraSize * num_cameras();
  for (Index j = 0; j < num_points(); ++j) {
    x.segment<kPointSize>(off + kPointSize * j) = points[static_cast<std::size_t>(j)].position;
  }
  return x;
}

void BundleProblem::set_parameters(const Vector& x) {
  if (x.size() != num_parameters()) {
    throw DimensionError("BundleProblem::set_parameters", static_cast<std::size_t>(num_parameters()),
                         static_cast<std::size_t>(x.size()));
  }
  for (Index i = 0; i < num_cameras(); ++i) {
    cameras[static_cast<std::size_t>(i)] = Camera::from_params(x.segment<kCameraSize>(kCameraSize * i));
  }
  const Index off = kCameraSize * num_cameras();
  for (Index j = 0; j < num_points(); ++j) {
    points[static_cast<std::size_t>(j)].position = x.segment<kPointSize>(off + kPointSize * j);
  }
}

void BundleProblem::validate() const {
  std::set<std::pair<Index, Index>> seen;
  for (std::size_t k = 0; k < observations.size(); ++k) {
    const auto& o = observations[k];
    if (o.camera < 0 || o.camera >= num_cameras() || o.point < 0 || o.point >= num_points()) {
      throw ContractError("observation " + std::to_string(k) + " has an index out of range");
    }
    if (!seen.emplace(o.camera, o.point).second) {
      throw ContractError("observation " + std::to_string(k) + " duplicates camera " +
                          std::to_string(o.camera) + " / point " + std::to_string(o.point));
    }
  }
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    if (!(cameras[i].focal > 0.0)) {
      throw ContractError("camera " + std::to_string(i) + " has non-positive focal length");
    }
  }
}

std::vector<std::string> BundleProblem::structural_warnings() const {
  std::vector<Index> per_camera(cameras.size(), 0);
  std::vector<Index> per_point(points.size(), 0);
  for (const auto& o : observations) {
    ++per_camera[static_cast<std::size_t>(o.camera)];
    ++per_point[static_cast<std::size_t>(o.point)];
  }
  std::vector<std::string> warnings;
  const auto lonely_cameras = std::count(per_camera.begin(), per_camera.end(), 0);
  if (lonely_cameras > 0) {
    warnings.push_back(std::to_string(lonely_cameras) + " camera(s) observe no points");
  }
  const auto weak_points =
      std::count_if(per_point.begin(), per_point.end(), [](Index n) { return n < 2; });
  if (weak_points > 0) {
    warnings.push_back(std::to_string(weak_points) + " point(s) seen by fewer than two cameras");
  }
  return warnings;
}

namespace {

constexpr double kPlaneTolerance = 1e-12;

}  // namespace

Eigen::Vector2d project(const Camera& camera, const Point3& point) {
  const Eigen::Vector3d pc = angle_axis_to_matrix(camera.rotation) * point.position + camera.translation;
  if (std::abs(pc.z()) < kPlaneTolerance) throw BehindCameraError({0});
  const Eigen::Vector2d p = -pc.head<2>() / pc.z();
  const double r2 = p.squaredNorm();
  const double distortion = 1.0 + camera.k1 * r2 + camera.k2 * r2 * r2;
  return camera.focal * distortion * p;
}

Eigen::Vector2d residual(const Camera& camera, const Point3& point, const Observation& obs) {
  return project(camera, point) - obs.measured;
}

double huber(double s) {
  if (s < 0.0) throw ContractError("huber: negative squared norm");
  return s <= 1.0 ? s : 2.0 * std::sqrt(s) - 1.0;
}

double huber_derivative(double s) {
  if (s < 0.0) throw ContractError("huber: negative squared norm");
  return s <= 1.0 ? 1.0 : 1.0 / std::sqrt(s);
}

double apply_loss(LossKind loss, double s) {
  return loss == LossKind::huber ? huber(s) : s;
}

double loss_derivative(LossKind loss, double s) {
  return loss == LossKind::huber ? huber_derivative(s) : 1.0;
}

Eigen::Vector2d linearize(const Camera& camera, const Point3& point, const Observation& obs,
                          Eigen::Matrix<double, 2, kCameraSize>* dcam,
                          Eigen::Matrix<double, 2, kPointSize>* dpoint) {
  const Eigen::Matrix3d rot = angle_axis_to_matrix(camera.rotation);
  const Eigen::Vector3d& x = point.position;
  const Eigen::Vector3d pc = rot * x + camera.translation;
  if (std::abs(pc.z()) < kPlaneTolerance) throw BehindCameraError({0});

  const double iz = 1.0 / pc.z();
  const Eigen::Vector2d p = -pc.head<2>() * iz;
  const double r2 = p.squaredNorm();
  const double distortion = 1.0 + camera.k1 * r2 + camera.k2 * r2 * r2;
  const Eigen::Vector2d pixel = camera.focal * distortion * p;

  if (dcam != nullptr || dpoint != nullptr) {
    Eigen::Matrix<double, 2, 3> dp_dpc;
    dp_dpc << -iz, 0.0, pc.x() * iz * iz,
              0.0, -iz, pc.y() * iz * iz;
    const Eigen::Vector2d dd_dp = 2.0 * (camera.k1 + 2.0 * camera.k2 * r2) * p;
    const Eigen::Matrix2d du_dp =
        camera.focal * (distortion * Eigen::Matrix2d::Identity() + p * dd_dp.transpose());
    const Eigen::Matrix<double, 2, 3> du_dpc = du_dp * dp_dpc;
    if (dcam != nullptr) {
      dcam->block<2, 3>(0, 0) = du_dpc * (-rot * skew(x) * right_jacobian(camera.rotation));
      dcam->block<2, 3>(0, 3) = du_dpc;
      dcam->col(6) = distortion * p;
      dcam->col(7) = camera.focal * r2 * p;
      dcam->col(8) = camera.focal * r2 * r2 * p;
    }
    if (dpoint != nullptr) *dpoint = du_dpc * rot;
  }
  return pixel - obs.measured;
}

Evaluation evaluate(const BundleProblem& problem) {
  Evaluation eval;
  eval.num_cameras = problem.num_cameras();
  eval.num_points = problem.num_points();
  eval.blocks.resize(problem.observations.size());
  std::vector<std::size_t> behind;
  for (std::size_t k = 0; k < problem.observations.size(); ++k) {
    const auto& obs = problem.observations[k];
    auto& jb = eval.blocks[k];
    jb.camera = obs.camera;
    jb.point = obs.point;
    Eigen::Vector2d f;
    try {
      f = linearize(problem.cameras[static_cast<std::size_t>(obs.camera)],
                    problem.points[static_cast<std::size_t>(obs.point)], obs, &jb.F, &jb.E);
    } catch (const BehindCameraError&) {
      behind.push_back(k);
      continue;
    }
    const double s = f.squaredNorm();
    eval.objective += apply_loss(problem.loss, s);
    jb.weight = std::sqrt(loss_derivative(problem.loss, s));
    jb.residual = jb.weight * f;
    if (jb.weight != 1.0) {
      jb.F *= jb.weight;
      jb.E *= jb.weight;
    }
  }
  if (!behind.empty()) throw BehindCameraError(std::move(behind));
  return eval;
}

double evaluate_objective(const BundleProblem& problem) {
  double objective = 0.0;
  std::vector<std::size_t> behind;
  for (std::size_t k = 0; k < problem.observations.size(); ++k) {
    const auto& obs = problem.observations[k];
    try {
      const Eigen::Vector2d f = linearize(problem.cameras[static_cast<std::size_t>(obs.camera)],
                                          problem.points[static_cast<std::size_t>(obs.point)], obs,
                                          nullptr, nullptr);
      objective += apply_loss(problem.loss, f.squaredNorm());
    } catch (const BehindCameraError&) {
      behind.push_back(k);
    }
  }
  if (!behind.empty()) throw BehindCameraError(std::move(behind));
  return objective;
}

DenseTall gauge_nullspace(const BundleProblem& problem) {
  const Index n = problem.num_cameras();
  DenseTall k = DenseTall::Zero(kCameraSize * n, kNullspaceSize);
  for (Index i = 0; i < n; ++i) {
    const Camera& cam = problem.cameras[static_cast<std::size_t>(i)];
    const Index row = kCameraSize * i;
    const Eigen::Matrix3d rot = angle_axis_to_matrix(cam.rotation);
    const Eigen::Matrix3d jr_inv = right_jacobian_inverse(cam.rotation);
    // World translation by s: t' = t - R s.
    k.block<3, 3>(row + 3, 0) = -rot;
    // World rotation by Exp(e w): R' = R Exp(-e w), t unchanged.
    k.block<3, 3>(row, 3) = -jr_inv;
    // Uniform scale: t' = (1 + e) t.
    k.block<3, 1>(row + 3, 6) = cam.translation;
    for (int p = 0; p < kCameraSize; ++p) k(row + p, kGaugeModes + p) = 1.0;
  }
  return k;
}

DenseTall gauge_point_motion(const BundleProblem& problem) {
  const Index m = problem.num_points();
  DenseTall n = DenseTall::Zero(kPointSize * m, kGaugeModes);
  for (Index j = 0; j < m; ++j) {
    const Eigen::Vector3d& x = problem.points[static_cast<std::size_t>(j)].position;
    const Index row = kPointSize * j;
    n.block<3, 3>(row, 0) = Eigen::Matrix3d::Identity();
    n.block<3, 3>(row, 3) = -skew(x);
    n.block<3, 1>(row, 6) = x;
  }
  return n;
}

}  // namespace mgba
