// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MGBA_ROTATION_HPP
#define MGBA_ROTATION_HPP

#include <Eigen/Core>

namespace mgba {

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// Rodrigues' formula; exact Taylor expansion near zero.
Eigen::Matrix3d angle_axis_to_matrix(const Eigen::Vector3d& angle_axis);

/// Inverse of angle_axis_to_matrix with angle in [0, pi].
Eigen::Vector3d matrix_to_angle_axis(const Eigen::Matrix3d& rotation);

/// Right Jacobian of the exponential map: R(w + d) ~= R(w) Exp(Jr(w) d).
Eigen::Matrix3d right_jacobian(const Eigen::Vector3d& angle_axis);
Eigen::Matrix3d right_jacobian_inverse(const Eigen::Vector3d& angle_axis);

/// Re-wraps an angle-axis vector so that its norm is below pi. The rotation
/// it represents is unchanged.
Eigen::Vector3d canonicalize_angle_axis(const Eigen::Vector3d& angle_axis);

}  // namespace mgba

#endif  // MGBA_ROTATION_HPP
