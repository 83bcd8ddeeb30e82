// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MGBA_SYNTH_HPP
#define MGBA_SYNTH_HPP

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "mgba/problem.hpp"

namespace mgba {

struct Box {
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Zero();
};

/// True when the segment a + t (b - a), t in [t0, t1], meets the box.
bool segment_hits_box(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Box& box, double t0 = 0.0,
                      double t1 = 1.0);

struct CitySpec {
  Index n_blocks_x = 2;
  Index n_blocks_y = 2;
  double block_size = 30.0;
  double street_width = 10.0;
  double min_height = 8.0;
  double max_height = 25.0;
  std::uint64_t seed = 1;
};

struct StreetSegment {
  Eigen::Vector2d a;
  Eigen::Vector2d b;
};

// Grid city centred on the origin: one box building per block, streets
// around every block. Street centerlines sit at -extent/2 + street_width/2 +
// i * pitch on both axes.
struct CityModel {
  CitySpec spec;
  std::vector<Box> buildings;
  /// Street pieces between neighbouring intersections.
  std::vector<StreetSegment> streets;
  std::vector<Eigen::Vector2d> intersections;

  double pitch() const { return spec.block_size + spec.street_width; }
  /// Side of the square ground area along x and y.
  double extent_x() const { return static_cast<double>(spec.n_blocks_x) * pitch() + spec.street_width; }
  double extent_y() const { return static_cast<double>(spec.n_blocks_y) * pitch() + spec.street_width; }
};

CityModel generate_city(const CitySpec& spec);

struct CameraSpec {
  double spacing = 3.0;
  double height = 2.0;
  /// Uniform horizontal position jitter, metres.
  double jitter = 0.25;
  double focal = 500.0;
  double k1 = 0.0;
  double k2 = 0.0;
  std::uint64_t seed = 2;
};

// Cameras every `spacing` metres along each full street line, looking along
// the line; consecutive lines alternate direction. A line of length L holds
// floor(L / spacing) + 1 cameras.
std::vector<Camera> sample_cameras(const CityModel& city, const CameraSpec& spec);

/// Points uniform by area over building side faces and the open ground.
std::vector<Point3> sample_points(const CityModel& city, Index n_points, std::uint64_t seed);

struct VisibilitySpec {
  /// Full cone angle.
  double fov_degrees = 90.0;
  double max_range = 40.0;
};

struct VisibilityResult {
  BundleProblem problem;
  Index dropped_cameras = 0;
  Index dropped_points = 0;
  std::vector<std::string> warnings;
};

// Observation (i, k) exists iff point k is within range, inside camera i's
// view cone and not occluded by any building. Points seen by fewer than two
// cameras and cameras seeing no point are pruned until neither remains; the
// survivors are renumbered in their original order and observations sorted
// by (camera, point). Measurements are exact projections.
VisibilityResult compute_visibility(const CityModel& city, const std::vector<Camera>& cameras,
                                    const std::vector<Point3>& points, const VisibilitySpec& spec);

struct NoiseSpec {
  /// Drift offset per metre of distance from the origin.
  double drift_rate = 1e-3;
  Eigen::Vector3d drift_direction = Eigen::Vector3d(1.0, 1.0, 0.0).normalized();
  double sin_amplitude = 5.0;
  /// Zero selects the city extent along x.
  double sin_wavelength = 0.0;
  double rotation_sigma = 0.01;
  double pixel_sigma = 0.0;
  std::uint64_t seed = 3;
};

struct PerturbResult {
  BundleProblem problem;
  /// Ground truth restricted to the surviving cameras, points and observations.
  BundleProblem ground_truth;
  Index removed_observations = 0;
};

// Moves every camera centre and point by
//   drift_rate |pos| u + sin_amplitude sin(2 pi pos_x / wavelength) u,
// left-multiplies rotations by Exp(n) with n ~ N(0, rotation_sigma^2 I), and
// adds optional pixel noise. Observations that end up behind their camera
// are removed (and the structure re-pruned).
PerturbResult perturb(const BundleProblem& truth, const NoiseSpec& noise, double default_wavelength);

struct SyntheticSpec {
  CitySpec city;
  CameraSpec cameras;
  /// Total points; zero selects points_per_block times the block count.
  Index n_points = 0;
  Index points_per_block = 1500;
  std::uint64_t point_seed = 4;
  VisibilitySpec visibility;
  NoiseSpec noise;
  LossKind loss = LossKind::huber;
};

struct SyntheticDataset {
  CityModel city;
  BundleProblem ground_truth;
  BundleProblem noisy;
  Index dropped_cameras = 0;
  Index dropped_points = 0;
  Index removed_observations = 0;
  std::vector<std::string> warnings;
};

SyntheticDataset make_dataset(const SyntheticSpec& spec);

/// Removes points seen by fewer than two cameras and cameras seeing no point
/// until stable, renumbering in order and sorting observations. Returns the
/// kept original camera and point indices.
std::pair<std::vector<Index>, std::vector<Index>> prune_structure(BundleProblem& problem);

}  // namespace mgba

#endif  // MGBA_SYNTH_HPP
