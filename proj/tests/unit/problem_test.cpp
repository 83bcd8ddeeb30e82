// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#include "mgba/problem.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mgba/error.hpp"
#include "mgba/random.hpp"
#include "mgba/rotation.hpp"
#include "mgba/synth.hpp"
#include "oracles.hpp"

namespace mgba {
namespace {

Point3 at(double x, double y, double z) { return {Eigen::Vector3d(x, y, z)}; }

TEST(Project, OnOpticalAxis) {
  const Camera cam;
  EXPECT_EQ(project(cam, at(0, 0, -1)), Eigen::Vector2d(0, 0));
}

TEST(Project, UnitOffsetNoDistortion) {
  const Camera cam;
  EXPECT_EQ(project(cam, at(1, 0, -1)), Eigen::Vector2d(1, 0));
}

TEST(Project, RadialDistortion) {
  Camera cam;
  cam.k1 = 0.1;
  const Eigen::Vector2d px = project(cam, at(1, 0, -1));
  EXPECT_NEAR(px.x(), 1.1, 1e-15);
  EXPECT_EQ(px.y(), 0.0);
}

TEST(Project, CameraPlaneThrows) {
  const Camera cam;
  EXPECT_THROW(project(cam, at(1, 0, 0)), BehindCameraError);
}

TEST(Project, MatchesIndependentEvaluator) {
  const BundleProblem p = testing::random_problem(3, 4, 10);
  for (const auto& o : p.observations) {
    const auto& cam = p.cameras[static_cast<std::size_t>(o.camera)];
    const auto& pt = p.points[static_cast<std::size_t>(o.point)];
    const Eigen::Vector2d ours = residual(cam, pt, o);
    const Eigen::Vector2d ref = testing::reference_project(cam.params(), pt.position) - o.measured;
    EXPECT_LE((ours - ref).norm(), 1e-12 * (1.0 + ref.norm()));
  }
}

TEST(Residual, ExactMeasurementIsZero) {
  const Camera cam;
  const Observation obs{0, 0, Eigen::Vector2d(1, 0)};
  EXPECT_EQ(residual(cam, at(1, 0, -1), obs), Eigen::Vector2d::Zero());
}

TEST(Residual, ZeroNoiseSyntheticProblem) {
  const auto data = make_dataset(testing::small_city_spec(1, 1, 9, 200));
  const Evaluation e = evaluate(data.ground_truth);
  EXPECT_LE(e.objective, 1e-20);
  for (const auto& b : e.blocks) EXPECT_EQ(b.weight, 1.0);
}

TEST(Huber, Values) {
  EXPECT_EQ(huber(0.25), 0.25);
  EXPECT_EQ(huber(1.0), 1.0);
  EXPECT_EQ(huber(4.0), 3.0);
  EXPECT_THROW(huber(-1.0), ContractError);
}

TEST(Huber, BoundedBySquaredNorm) {
  for (double s = 0.0; s < 50.0; s += 0.37) {
    EXPECT_GE(huber(s), 0.0);
    EXPECT_LE(huber(s), s);
  }
}

TEST(Huber, DerivativeContinuousAtKnee) {
  const double h = 1e-7;
  const double left = (huber(1.0) - huber(1.0 - h)) / h;
  const double right = (huber(1.0 + h) - huber(1.0)) / h;
  EXPECT_LE(std::abs(left - right), 1e-6);
  EXPECT_EQ(huber_derivative(1.0), 1.0);
}

TEST(Evaluate, HuberWeightAboveKnee) {
  BundleProblem p;
  p.loss = LossKind::huber;
  p.cameras.resize(1);
  p.points.push_back(at(0, 0, -1));
  // Residual (2, 0): s = 4.
  p.observations.push_back({0, 0, Eigen::Vector2d(-2, 0)});
  const Evaluation e = evaluate(p);
  EXPECT_NEAR(e.blocks[0].weight, std::sqrt(0.5), 1e-15);
  EXPECT_EQ(e.objective, 3.0);
  EXPECT_NEAR(e.blocks[0].residual.x(), 2.0 * std::sqrt(0.5), 1e-15);
}

TEST(Evaluate, SingleObservationJacobianMatchesFiniteDifferences) {
  BundleProblem p;
  Camera cam;
  cam.rotation = Eigen::Vector3d(0.1, -0.2, 0.05);
  cam.translation = Eigen::Vector3d(0.3, -0.1, -4.0);
  cam.focal = 1.3;
  cam.k1 = 0.02;
  cam.k2 = -0.01;
  p.cameras.push_back(cam);
  p.points.push_back(at(0.4, 0.2, 0.5));
  p.observations.push_back({0, 0, Eigen::Vector2d(0.1, 0.1)});
  const Evaluation e = evaluate(p);
  const DenseMatrix fd = testing::finite_difference_jacobian(p, p.parameters());
  EXPECT_LE((e.blocks[0].F - fd.leftCols(9)).norm(), 1e-6 * fd.norm());
  EXPECT_LE((e.blocks[0].E - fd.rightCols(3)).norm(), 1e-6 * fd.norm());
}

TEST(Evaluate, TwentyRandomObservationJacobians) {
  Rng rng(17);
  int checked = 0;
  for (std::uint64_t s = 0; checked < 20; ++s) {
    BundleProblem p;
    Camera cam;
    cam.rotation = Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    cam.translation = Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-4, -2));
    cam.focal = rng.uniform(0.5, 2.0);
    cam.k1 = rng.uniform(-0.1, 0.1);
    cam.k2 = rng.uniform(-0.1, 0.1);
    p.cameras.push_back(cam);
    p.points.push_back(at(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)));
    p.observations.push_back({0, 0, Eigen::Vector2d(rng.normal(), rng.normal())});
    Eigen::Matrix<double, 2, 9> dcam;
    Eigen::Matrix<double, 2, 3> dpt;
    try {
      linearize(p.cameras[0], p.points[0], p.observations[0], &dcam, &dpt);
    } catch (const BehindCameraError&) {
      continue;
    }
    const DenseMatrix fd = testing::finite_difference_jacobian(p, p.parameters());
    DenseMatrix analytic(2, 12);
    analytic << dcam, dpt;
    EXPECT_LE((analytic - fd).norm(), 1e-6 * fd.norm()) << "sample " << s;
    ++checked;
  }
}

TEST(Evaluate, WeightedJacobianMatchesFiniteDifferencesOfProblem) {
  const BundleProblem p = testing::random_problem(5, 5, 12, 0.0, LossKind::trivial);
  const Evaluation e = evaluate(p);
  const DenseMatrix fd = testing::finite_difference_jacobian(p, p.parameters());
  const auto dense = testing::dense_normal_equations(e, 1.0);
  EXPECT_LE(testing::relative_error(dense.J, fd), 1e-6);
}

TEST(Evaluate, BehindCameraListsObservations) {
  BundleProblem p;
  p.cameras.resize(1);
  p.points = {at(0, 0, -1), at(0, 0, 0), at(1, 1, 0)};
  p.observations = {{0, 0, {}}, {0, 1, {}}, {0, 2, {}}};
  try {
    evaluate(p);
    FAIL() << "expected BehindCameraError";
  } catch (const BehindCameraError& e) {
    EXPECT_EQ(e.observations(), (std::vector<std::size_t>{1, 2}));
  }
}

TEST(Validate, RejectsBadIndicesAndDuplicates) {
  BundleProblem p;
  p.cameras.resize(1);
  p.points.resize(1);
  p.observations = {{0, 1, {}}};
  EXPECT_THROW(p.validate(), ContractError);
  p.observations = {{0, 0, {}}, {0, 0, {}}};
  EXPECT_THROW(p.validate(), ContractError);
  p.observations = {{0, 0, {}}};
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(p.structural_warnings().size(), 1u);
}

TEST(Parameters, RoundTrip) {
  BundleProblem p = testing::random_problem(8, 3, 5);
  const Vector x = p.parameters();
  p.set_parameters(x);
  EXPECT_EQ(p.parameters(), x);
  EXPECT_THROW(p.set_parameters(Vector::Zero(3)), DimensionError);
}

TEST(Rotation, CanonicalizationPreservesProjection) {
  Camera cam;
  cam.translation = Eigen::Vector3d(0.1, 0.2, -3.0);
  const Point3 pt = at(0.3, -0.4, 0.2);
  for (const Eigen::Vector3d axis : {Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0.3, -0.5, 0.8).normalized()}) {
    for (double angle : {0.4, 2.5, 3.0}) {
      cam.rotation = angle * axis;
      const Eigen::Vector2d ref = project(cam, pt);
      Camera wrapped = cam;
      wrapped.rotation = cam.rotation * (1.0 - 2.0 * std::numbers::pi / cam.rotation.norm());
      EXPECT_LE((project(wrapped, pt) - ref).norm(), 1e-10);
      Camera canonical = wrapped;
      canonical.rotation = canonicalize_angle_axis(wrapped.rotation);
      EXPECT_LT(canonical.rotation.norm(), std::numbers::pi + 1e-12);
      EXPECT_LE((project(canonical, pt) - ref).norm(), 1e-10);
    }
  }
}

TEST(Rotation, MatrixRoundTrip) {
  const Eigen::Vector3d w(0.3, -1.2, 0.7);
  EXPECT_LE((matrix_to_angle_axis(angle_axis_to_matrix(w)) - w).norm(), 1e-12);
}

TEST(GaugeNullspace, IdentityCameraTranslationColumn) {
  BundleProblem p;
  p.cameras.resize(1);
  const DenseTall k = gauge_nullspace(p);
  ASSERT_EQ(k.rows(), 9);
  ASSERT_EQ(k.cols(), kNullspaceSize);
  Eigen::Matrix<double, 9, 1> expected = Eigen::Matrix<double, 9, 1>::Zero();
  expected(3) = -1.0;
  EXPECT_EQ((Eigen::Matrix<double, 9, 1>(k.col(0))), expected);
  for (int c = 0; c < 9; ++c) {
    for (int r = 0; r < 9; ++r) EXPECT_EQ(k(r, kGaugeModes + c), r == c ? 1.0 : 0.0);
  }
}

TEST(GaugeNullspace, ScaleModeIsTranslation) {
  const BundleProblem p = testing::random_problem(4, 4, 6);
  const DenseTall k = gauge_nullspace(p);
  for (Index i = 0; i < p.num_cameras(); ++i) {
    EXPECT_EQ(Eigen::Vector3d(k.block<3, 1>(9 * i + 3, 6)), p.cameras[static_cast<std::size_t>(i)].translation);
    EXPECT_EQ(Eigen::Vector3d(k.block<3, 1>(9 * i, 6)), Eigen::Vector3d::Zero());
  }
}

DenseMatrix full_gauge_basis(const BundleProblem& p) {
  const DenseTall kc = gauge_nullspace(p);
  const DenseTall np = gauge_point_motion(p);
  DenseMatrix n(p.num_parameters(), kGaugeModes);
  n << kc.leftCols(kGaugeModes), np;
  return n;
}

TEST(GaugeNullspace, ResidualsInvariantAlongEveryMode) {
  const BundleProblem p = testing::random_problem(11, 6, 20);
  const Vector x = p.parameters();
  const DenseMatrix n = full_gauge_basis(p);
  const double h = 1e-5;
  const double f_norm = testing::reference_residuals(p, x).norm();
  for (int c = 0; c < kGaugeModes; ++c) {
    const Vector d = n.col(c);
    const Vector df =
        (testing::reference_residuals(p, x + h * d) - testing::reference_residuals(p, x - h * d)) / (2.0 * h);
    EXPECT_LE(df.norm(), 1e-6 * f_norm) << "mode " << c;
  }
}

TEST(GaugeNullspace, NormalMatrixAnnihilatesGauge) {
  const BundleProblem p = testing::random_problem(12, 6, 25, 0.5, LossKind::trivial);
  const auto dense = testing::dense_normal_equations(evaluate(p), 1.0);
  const DenseMatrix jtj = dense.J.transpose() * dense.J;
  const DenseMatrix n = full_gauge_basis(p);
  EXPECT_LE((jtj * n).norm(), 1e-6 * jtj.norm() * n.norm());
}

}  // namespace
}  // namespace mgba
