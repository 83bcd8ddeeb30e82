// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#include "mgba/rotation.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

namespace mgba {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Matrix3d angle_axis_to_matrix(const Eigen::Vector3d& w) {
  const double theta2 = w.squaredNorm();
  const Eigen::Matrix3d k = skew(w);
  if (theta2 < 1e-20) {
    return Eigen::Matrix3d::Identity() + k + 0.5 * k * k;
  }
  const double theta = std::sqrt(theta2);
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / theta2;
  return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

Eigen::Vector3d matrix_to_angle_axis(const Eigen::Matrix3d& rotation) {
  const Eigen::AngleAxisd aa{Eigen::Quaterniond(rotation).normalized()};
  double angle = aa.angle();
  Eigen::Vector3d axis = aa.axis();
  if (angle > std::numbers::pi) {
    angle = 2.0 * std::numbers::pi - angle;
    axis = -axis;
  }
  return angle * axis;
}

Eigen::Matrix3d right_jacobian(const Eigen::Vector3d& w) {
  const double theta2 = w.squaredNorm();
  const Eigen::Matrix3d k = skew(w);
  if (theta2 < 1e-12) {
    return Eigen::Matrix3d::Identity() - 0.5 * k + (1.0 / 6.0) * k * k;
  }
  const double theta = std::sqrt(theta2);
  const double a = (1.0 - std::cos(theta)) / theta2;
  const double b = (theta - std::sin(theta)) / (theta2 * theta);
  return Eigen::Matrix3d::Identity() - a * k + b * k * k;
}

Eigen::Matrix3d right_jacobian_inverse(const Eigen::Vector3d& w) {
  const double theta2 = w.squaredNorm();
  const Eigen::Matrix3d k = skew(w);
  if (theta2 < 1e-12) {
    return Eigen::Matrix3d::Identity() + 0.5 * k + (1.0 / 12.0) * k * k;
  }
  const double theta = std::sqrt(theta2);
  const double c = 1.0 / theta2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Eigen::Matrix3d::Identity() + 0.5 * k + c * k * k;
}

Eigen::Vector3d canonicalize_angle_axis(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  if (theta < std::numbers::pi) return w;
  const double two_pi = 2.0 * std::numbers::pi;
  double wrapped = std::fmod(theta, two_pi);
  if (wrapped >= std::numbers::pi) wrapped -= two_pi;
  // wrapped in [-pi, pi); a negative angle flips the axis.
  Eigen::Vector3d out = w * (wrapped / theta);
  if (out.norm() >= std::numbers::pi) out *= (1.0 - 1e-15);
  return out;
}

}  // namespace mgba
