// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#include "mgba/synth.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mgba/error.hpp"
#include "mgba/random.hpp"
#include "mgba/rotation.hpp"

namespace mgba {
namespace {

double centerline(double extent, double street_width, double pitch, Index i) {
  return -0.5 * extent + 0.5 * street_width + static_cast<double>(i) * pitch;
}

Camera look_along(const Eigen::Vector3d& center, const Eigen::Vector3d& direction, const CameraSpec& spec) {
  const Eigen::Vector3d z = -direction.normalized();
  const Eigen::Vector3d y = Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d x = y.cross(z);
  Eigen::Matrix3d rot;
  rot.row(0) = x;
  rot.row(1) = y;
  rot.row(2) = z;
  Camera c;
  c.rotation = matrix_to_angle_axis(rot);
  c.translation = -(angle_axis_to_matrix(c.rotation) * center);
  c.focal = spec.focal;
  c.k1 = spec.k1;
  c.k2 = spec.k2;
  return c;
}

// Uniform cell index over the ground plane for range queries.
class PointGrid {
 public:
  PointGrid(const std::vector<Point3>& points, double cell) : cell_(cell) {
    for (const auto& p : points) {
      min_x_ = std::min(min_x_, p.position.x());
      min_y_ = std::min(min_y_, p.position.y());
      max_x_ = std::max(max_x_, p.position.x());
      max_y_ = std::max(max_y_, p.position.y());
    }
    if (points.empty()) min_x_ = min_y_ = max_x_ = max_y_ = 0.0;
    nx_ = static_cast<Index>((max_x_ - min_x_) / cell_) + 1;
    ny_ = static_cast<Index>((max_y_ - min_y_) / cell_) + 1;
    cells_.resize(static_cast<std::size_t>(nx_ * ny_));
    for (std::size_t k = 0; k < points.size(); ++k) {
      cells_[static_cast<std::size_t>(index(points[k].position.x(), points[k].position.y()))].push_back(
          static_cast<Index>(k));
    }
  }

  /// Point indices in cells overlapping the square around (x, y), ascending.
  std::vector<Index> near(double x, double y, double radius) const {
    std::vector<Index> out;
    const Index ix0 = clamp_x(static_cast<Index>(std::floor((x - radius - min_x_) / cell_)));
    const Index ix1 = clamp_x(static_cast<Index>(std::floor((x + radius - min_x_) / cell_)));
    const Index iy0 = clamp_y(static_cast<Index>(std::floor((y - radius - min_y_) / cell_)));
    const Index iy1 = clamp_y(static_cast<Index>(std::floor((y + radius - min_y_) / cell_)));
    for (Index ix = ix0; ix <= ix1; ++ix) {
      for (Index iy = iy0; iy <= iy1; ++iy) {
        const auto& c = cells_[static_cast<std::size_t>(ix * ny_ + iy)];
        out.insert(out.end(), c.begin(), c.end());
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  Index clamp_x(Index i) const { return std::clamp<Index>(i, 0, nx_ - 1); }
  Index clamp_y(Index i) const { return std::clamp<Index>(i, 0, ny_ - 1); }
  Index index(double x, double y) const {
    return clamp_x(static_cast<Index>((x - min_x_) / cell_)) * ny_ + clamp_y(static_cast<Index>((y - min_y_) / cell_));
  }

  double cell_;
  double min_x_ = std::numeric_limits<double>::infinity();
  double min_y_ = std::numeric_limits<double>::infinity();
  double max_x_ = -std::numeric_limits<double>::infinity();
  double max_y_ = -std::numeric_limits<double>::infinity();
  Index nx_ = 1;
  Index ny_ = 1;
  std::vector<std::vector<Index>> cells_;
};

void apply_kept(BundleProblem& problem, const std::vector<Index>& kept_cameras,
                const std::vector<Index>& kept_points) {
  std::vector<Index> cam_map(problem.cameras.size(), -1);
  std::vector<Index> pt_map(problem.points.size(), -1);
  std::vector<Camera> cameras;
  std::vector<Point3> points;
  for (Index c : kept_cameras) {
    cam_map[static_cast<std::size_t>(c)] = static_cast<Index>(cameras.size());
    cameras.push_back(problem.cameras[static_cast<std::size_t>(c)]);
  }
  for (Index p : kept_points) {
    pt_map[static_cast<std::size_t>(p)] = static_cast<Index>(points.size());
    points.push_back(problem.points[static_cast<std::size_t>(p)]);
  }
  std::vector<Observation> observations;
  for (const auto& o : problem.observations) {
    const Index c = cam_map[static_cast<std::size_t>(o.camera)];
    const Index p = pt_map[static_cast<std::size_t>(o.point)];
    if (c >= 0 && p >= 0) observations.push_back({c, p, o.measured});
  }
  std::sort(observations.begin(), observations.end(), [](const Observation& a, const Observation& b) {
    return a.camera != b.camera ? a.camera < b.camera : a.point < b.point;
  });
  problem.cameras = std::move(cameras);
  problem.points = std::move(points);
  problem.observations = std::move(observations);
}

}  // namespace

bool segment_hits_box(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Box& box, double t0, double t1) {
  const Eigen::Vector3d d = b - a;
  double lo = t0;
  double hi = t1;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d(k)) < 1e-300) {
      if (a(k) < box.min(k) || a(k) > box.max(k)) return false;
      continue;
    }
    double ta = (box.min(k) - a(k)) / d(k);
    double tb = (box.max(k) - a(k)) / d(k);
    if (ta > tb) std::swap(ta, tb);
    lo = std::max(lo, ta);
    hi = std::min(hi, tb);
    if (lo > hi) return false;
  }
  return true;
}

CityModel generate_city(const CitySpec& spec) {
  if (spec.n_blocks_x < 1 || spec.n_blocks_y < 1 || !(spec.block_size > 0.0) || !(spec.street_width > 0.0) ||
      !(spec.min_height > 0.0) || spec.max_height < spec.min_height) {
    throw ContractError("generate_city: dimensions must be positive");
  }
  CityModel city;
  city.spec = spec;
  Rng rng(spec.seed);
  const double pitch = city.pitch();
  const double ex = city.extent_x();
  const double ey = city.extent_y();
  for (Index i = 0; i < spec.n_blocks_x; ++i) {
    for (Index j = 0; j < spec.n_blocks_y; ++j) {
      Box b;
      b.min = {-0.5 * ex + spec.street_width + static_cast<double>(i) * pitch,
               -0.5 * ey + spec.street_width + static_cast<double>(j) * pitch, 0.0};
      b.max = {b.min.x() + spec.block_size, b.min.y() + spec.block_size,
               rng.uniform(spec.min_height, spec.max_height)};
      city.buildings.push_back(b);
    }
  }
  for (Index i = 0; i <= spec.n_blocks_x; ++i) {
    for (Index j = 0; j <= spec.n_blocks_y; ++j) {
      city.intersections.emplace_back(centerline(ex, spec.street_width, pitch, i),
                                      centerline(ey, spec.street_width, pitch, j));
    }
  }
  // Along x, then along y.
  for (Index j = 0; j <= spec.n_blocks_y; ++j) {
    const double y = centerline(ey, spec.street_width, pitch, j);
    for (Index i = 0; i < spec.n_blocks_x; ++i) {
      city.streets.push_back({{centerline(ex, spec.street_width, pitch, i), y},
                              {centerline(ex, spec.street_width, pitch, i + 1), y}});
    }
  }
  for (Index i = 0; i <= spec.n_blocks_x; ++i) {
    const double x = centerline(ex, spec.street_width, pitch, i);
    for (Index j = 0; j < spec.n_blocks_y; ++j) {
      city.streets.push_back({{x, centerline(ey, spec.street_width, pitch, j)},
                              {x, centerline(ey, spec.street_width, pitch, j + 1)}});
    }
  }
  return city;
}

std::vector<Camera> sample_cameras(const CityModel& city, const CameraSpec& spec) {
  if (!(spec.spacing > 0.0)) throw ContractError("sample_cameras: spacing must be positive");
  if (!(spec.focal > 0.0)) throw ContractError("sample_cameras: focal must be positive");
  Rng rng(spec.seed);
  const CitySpec& cs = city.spec;
  const double pitch = city.pitch();
  const double ex = city.extent_x();
  const double ey = city.extent_y();
  std::vector<Camera> cameras;
  Index line = 0;
  auto walk = [&](const Eigen::Vector2d& start, const Eigen::Vector2d& end) {
    const double length = (end - start).norm();
    const auto count = static_cast<Index>(std::floor(length / spec.spacing + 1e-9)) + 1;
    const Eigen::Vector2d dir = (end - start) / length;
    const bool forward = line % 2 == 0;
    for (Index k = 0; k < count; ++k) {
      const Index s = forward ? k : count - 1 - k;
      Eigen::Vector2d pos = start + dir * (static_cast<double>(s) * spec.spacing);
      pos.x() += rng.uniform(-spec.jitter, spec.jitter);
      pos.y() += rng.uniform(-spec.jitter, spec.jitter);
      const Eigen::Vector2d look = forward ? dir : Eigen::Vector2d(-dir);
      cameras.push_back(look_along({pos.x(), pos.y(), spec.height}, {look.x(), look.y(), 0.0}, spec));
    }
    ++line;
  };
  for (Index j = 0; j <= cs.n_blocks_y; ++j) {
    const double y = centerline(ey, cs.street_width, pitch, j);
    walk({centerline(ex, cs.street_width, pitch, 0), y},
         {centerline(ex, cs.street_width, pitch, cs.n_blocks_x), y});
  }
  for (Index i = 0; i <= cs.n_blocks_x; ++i) {
    const double x = centerline(ex, cs.street_width, pitch, i);
    walk({x, centerline(ey, cs.street_width, pitch, 0)},
         {x, centerline(ey, cs.street_width, pitch, cs.n_blocks_y)});
  }
  return cameras;
}

std::vector<Point3> sample_points(const CityModel& city, Index n_points, std::uint64_t seed) {
  if (n_points <= 0) throw ContractError("sample_points: n_points must be positive");
  Rng rng(seed);
  const double ex = city.extent_x();
  const double ey = city.extent_y();
  // Surfaces: 4 faces per building, then the ground.
  std::vector<double> cumulative;
  double total = 0.0;
  for (const auto& b : city.buildings) {
    const Eigen::Vector3d size = b.max - b.min;
    for (int f = 0; f < 4; ++f) {
      total += (f < 2 ? size.x() : size.y()) * size.z();
      cumulative.push_back(total);
    }
  }
  double footprint = 0.0;
  for (const auto& b : city.buildings) footprint += (b.max.x() - b.min.x()) * (b.max.y() - b.min.y());
  total += ex * ey - footprint;
  cumulative.push_back(total);

  std::vector<Point3> points;
  points.reserve(static_cast<std::size_t>(n_points));
  while (static_cast<Index>(points.size()) < n_points) {
    const double pick = rng.uniform(0.0, total);
    const auto surface = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
    Point3 p;
    if (surface >= 4 * city.buildings.size()) {
      for (;;) {
        const Eigen::Vector3d q(rng.uniform(-0.5 * ex, 0.5 * ex), rng.uniform(-0.5 * ey, 0.5 * ey), 0.0);
        const bool inside = std::any_of(city.buildings.begin(), city.buildings.end(), [&](const Box& b) {
          return q.x() > b.min.x() && q.x() < b.max.x() && q.y() > b.min.y() && q.y() < b.max.y();
        });
        if (!inside) {
          p.position = q;
          break;
        }
      }
    } else {
      const Box& b = city.buildings[surface / 4];
      const std::size_t f = surface % 4;
      const double u = rng.uniform();
      const double h = rng.uniform(b.min.z(), b.max.z());
      switch (f) {
        case 0:
          p.position = {b.min.x() + u * (b.max.x() - b.min.x()), b.min.y(), h};
          break;
        case 1:
          p.position = {b.min.x() + u * (b.max.x() - b.min.x()), b.max.y(), h};
          break;
        case 2:
          p.position = {b.min.x(), b.min.y() + u * (b.max.y() - b.min.y()), h};
          break;
        default:
          p.position = {b.max.x(), b.min.y() + u * (b.max.y() - b.min.y()), h};
          break;
      }
    }
    points.push_back(p);
  }
  return points;
}

std::pair<std::vector<Index>, std::vector<Index>> prune_structure(BundleProblem& problem) {
  std::vector<Index> cam_orig(problem.cameras.size());
  std::vector<Index> pt_orig(problem.points.size());
  for (std::size_t i = 0; i < cam_orig.size(); ++i) cam_orig[i] = static_cast<Index>(i);
  for (std::size_t j = 0; j < pt_orig.size(); ++j) pt_orig[j] = static_cast<Index>(j);
  for (;;) {
    std::vector<Index> per_camera(problem.cameras.size(), 0);
    std::vector<Index> per_point(problem.points.size(), 0);
    for (const auto& o : problem.observations) {
      ++per_camera[static_cast<std::size_t>(o.camera)];
      ++per_point[static_cast<std::size_t>(o.point)];
    }
    std::vector<Index> kept_points;
    for (std::size_t j = 0; j < per_point.size(); ++j) {
      if (per_point[j] >= 2) kept_points.push_back(static_cast<Index>(j));
    }
    // Camera counts after dropping weak points.
    std::vector<bool> point_kept(problem.points.size(), false);
    for (Index j : kept_points) point_kept[static_cast<std::size_t>(j)] = true;
    std::fill(per_camera.begin(), per_camera.end(), 0);
    for (const auto& o : problem.observations) {
      if (point_kept[static_cast<std::size_t>(o.point)]) ++per_camera[static_cast<std::size_t>(o.camera)];
    }
    std::vector<Index> kept_cameras;
    for (std::size_t i = 0; i < per_camera.size(); ++i) {
      if (per_camera[i] > 0) kept_cameras.push_back(static_cast<Index>(i));
    }
    if (kept_cameras.size() == problem.cameras.size() && kept_points.size() == problem.points.size()) break;
    apply_kept(problem, kept_cameras, kept_points);
    std::vector<Index> next_cam;
    std::vector<Index> next_pt;
    for (Index c : kept_cameras) next_cam.push_back(cam_orig[static_cast<std::size_t>(c)]);
    for (Index p : kept_points) next_pt.push_back(pt_orig[static_cast<std::size_t>(p)]);
    cam_orig = std::move(next_cam);
    pt_orig = std::move(next_pt);
  }
  std::sort(problem.observations.begin(), problem.observations.end(),
            [](const Observation& a, const Observation& b) {
              return a.camera != b.camera ? a.camera < b.camera : a.point < b.point;
            });
  return {cam_orig, pt_orig};
}

VisibilityResult compute_visibility(const CityModel& city, const std::vector<Camera>& cameras,
                                    const std::vector<Point3>& points, const VisibilitySpec& spec) {
  if (!(spec.max_range > 0.0) || !(spec.fov_degrees > 0.0) || !(spec.fov_degrees < 180.0)) {
    throw ContractError("compute_visibility: need max_range > 0 and 0 < fov < 180");
  }
  const double cos_half = std::cos(0.5 * spec.fov_degrees * std::numbers::pi / 180.0);
  const PointGrid grid(points, spec.max_range);
  VisibilityResult out;
  out.problem.cameras = cameras;
  out.problem.points = points;
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    const Camera& cam = cameras[i];
    const Eigen::Matrix3d rot = angle_axis_to_matrix(cam.rotation);
    const Eigen::Vector3d center = cam.center();
    const Eigen::Vector3d look = -rot.row(2).transpose();
    std::vector<const Box*> nearby;
    for (const auto& b : city.buildings) {
      const double dx = std::max({b.min.x() - center.x(), 0.0, center.x() - b.max.x()});
      const double dy = std::max({b.min.y() - center.y(), 0.0, center.y() - b.max.y()});
      if (dx * dx + dy * dy <= spec.max_range * spec.max_range) nearby.push_back(&b);
    }
    for (Index k : grid.near(center.x(), center.y(), spec.max_range)) {
      const Eigen::Vector3d& x = points[static_cast<std::size_t>(k)].position;
      const Eigen::Vector3d ray = x - center;
      const double range = ray.norm();
      if (range > spec.max_range || range <= 0.0) continue;
      if (ray.dot(look) < cos_half * range) continue;
      const double t_end = 1.0 - 1e-6 * range / std::max(range, 1.0);
      const bool blocked = std::any_of(nearby.begin(), nearby.end(),
                                       [&](const Box* b) { return segment_hits_box(center, x, *b, 0.0, t_end); });
      if (blocked) continue;
      Observation o;
      o.camera = static_cast<Index>(i);
      o.point = k;
      o.measured = project(cam, points[static_cast<std::size_t>(k)]);
      out.problem.observations.push_back(o);
    }
  }
  const auto n_cam = static_cast<Index>(cameras.size());
  const auto n_pt = static_cast<Index>(points.size());
  prune_structure(out.problem);
  out.dropped_cameras = n_cam - out.problem.num_cameras();
  out.dropped_points = n_pt - out.problem.num_points();
  if (out.dropped_cameras > 0) {
    out.warnings.push_back(std::to_string(out.dropped_cameras) + " camera(s) saw no points and were dropped");
  }
  return out;
}

PerturbResult perturb(const BundleProblem& truth, const NoiseSpec& noise, double default_wavelength) {
  if (noise.drift_rate < 0.0 || noise.sin_amplitude < 0.0 || noise.rotation_sigma < 0.0 ||
      noise.pixel_sigma < 0.0 || noise.sin_wavelength < 0.0) {
    throw ContractError("perturb: noise magnitudes must be nonnegative");
  }
  if (std::abs(noise.drift_direction.norm() - 1.0) > 1e-9) {
    throw ContractError("perturb: drift direction must have unit norm");
  }
  const double wavelength = noise.sin_wavelength > 0.0 ? noise.sin_wavelength : default_wavelength;
  if (!(wavelength > 0.0)) throw ContractError("perturb: wavelength must be positive");
  auto offset = [&](const Eigen::Vector3d& pos) -> Eigen::Vector3d {
    return (noise.drift_rate * pos.norm() +
            noise.sin_amplitude * std::sin(2.0 * std::numbers::pi * pos.x() / wavelength)) *
           noise.drift_direction;
  };

  Rng rng(noise.seed);
  PerturbResult out;
  out.problem = truth;
  for (auto& cam : out.problem.cameras) {
    const Eigen::Vector3d center = cam.center() + offset(cam.center());
    const Eigen::Vector3d n(rng.normal(), rng.normal(), rng.normal());
    const Eigen::Matrix3d rot = angle_axis_to_matrix(noise.rotation_sigma * n) * angle_axis_to_matrix(cam.rotation);
    cam.rotation = matrix_to_angle_axis(rot);
    cam.translation = -(angle_axis_to_matrix(cam.rotation) * center);
  }
  for (auto& p : out.problem.points) p.position += offset(p.position);
  if (noise.pixel_sigma > 0.0) {
    for (auto& o : out.problem.observations) {
      o.measured += noise.pixel_sigma * Eigen::Vector2d(rng.normal(), rng.normal());
    }
  }

  out.ground_truth = truth;
  std::vector<Observation> kept_noisy;
  std::vector<Observation> kept_truth;
  for (std::size_t k = 0; k < out.problem.observations.size(); ++k) {
    const auto& o = out.problem.observations[k];
    const Camera& cam = out.problem.cameras[static_cast<std::size_t>(o.camera)];
    const double depth = (angle_axis_to_matrix(cam.rotation) * out.problem.points[static_cast<std::size_t>(o.point)].position +
                          cam.translation)
                             .z();
    // Viewing is along -z; depth must be safely negative.
    if (depth < -1e-6) {
      kept_noisy.push_back(o);
      kept_truth.push_back(truth.observations[k]);
    }
  }
  out.removed_observations = static_cast<Index>(out.problem.observations.size() - kept_noisy.size());
  if (out.removed_observations > 0) {
    out.problem.observations = std::move(kept_noisy);
    out.ground_truth.observations = std::move(kept_truth);
    const auto [cams, pts] = prune_structure(out.problem);
    apply_kept(out.ground_truth, cams, pts);
  }
  return out;
}

SyntheticDataset make_dataset(const SyntheticSpec& spec) {
  SyntheticDataset ds;
  ds.city = generate_city(spec.city);
  const std::vector<Camera> cameras = sample_cameras(ds.city, spec.cameras);
  const Index n_points =
      spec.n_points > 0 ? spec.n_points : spec.points_per_block * spec.city.n_blocks_x * spec.city.n_blocks_y;
  const std::vector<Point3> points = sample_points(ds.city, n_points, spec.point_seed);
  VisibilityResult vis = compute_visibility(ds.city, cameras, points, spec.visibility);
  ds.dropped_cameras = vis.dropped_cameras;
  ds.dropped_points = vis.dropped_points;
  ds.warnings = std::move(vis.warnings);
  vis.problem.loss = spec.loss;
  PerturbResult noisy = perturb(vis.problem, spec.noise, ds.city.extent_x());
  ds.noisy = std::move(noisy.problem);
  ds.ground_truth = std::move(noisy.ground_truth);
  ds.removed_observations = noisy.removed_observations;
  if (ds.removed_observations > 0) {
    ds.warnings.push_back(std::to_string(ds.removed_observations) +
                          " observation(s) fell behind their camera after perturbation and were removed");
  }
  return ds;
}

}  // namespace mgba
