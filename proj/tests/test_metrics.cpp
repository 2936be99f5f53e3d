#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Geometry>

#include "core/metrics.hpp"

using namespace bisdf;
using Eigen::AngleAxisd;
using Eigen::Matrix3d;
using Eigen::Vector3d;
using Eigen::Vector4d;
using lie::Sim3Transform;
using metrics::decompose_pose;
using metrics::pose_errors;

namespace {

Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace

TEST_CASE("decompose identity") {
  auto p = decompose_pose(Sim3Transform());
  CHECK(p.scale == Vector3d::Ones());
  CHECK(p.position == Vector3d::Zero());
  CHECK(p.quaternion == Vector4d(1, 0, 0, 0));
}

TEST_CASE("decompose known pose") {
  Matrix3d R(AngleAxisd(M_PI / 2, Vector3d::UnitZ()));
  auto T = Sim3Transform::FromParts(2.0, R, Vector3d(1, 2, 3));
  auto p = decompose_pose(T);
  CHECK(p.scale.isApprox(Vector3d(2, 2, 2), 1e-12));
  CHECK(p.position == Vector3d(1, 2, 3));
  CHECK(p.quaternion(0) == doctest::Approx(std::sqrt(0.5)));
  // z-axis component magnitude matches a 90 degree yaw.
  CHECK(std::abs(p.quaternion(3)) == doctest::Approx(std::sqrt(0.5)));
  CHECK(p.quaternion(1) == doctest::Approx(0.0));
}

TEST_CASE("quaternion round trip over random rotations") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const Matrix3d R = random_rotation(rng);
    auto T = Sim3Transform::FromParts(1.0, R, Vector3d::Zero());
    auto p = decompose_pose(T);
    CHECK(p.quaternion(0) >= 0.0);
    CHECK(p.quaternion.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((metrics::rotation_from_quaternion(p.quaternion) - R).norm() < 1e-9);
  }
}

TEST_CASE("fallback branch handles 180 degree rotations") {
  for (int axis = 0; axis < 3; ++axis) {
    Matrix3d R(AngleAxisd(M_PI, Vector3d::Unit(axis)));
    auto p = decompose_pose(Sim3Transform::FromParts(1.0, R, Vector3d::Zero()));
    CHECK((metrics::rotation_from_quaternion(p.quaternion) - R).norm() < 1e-9);
    // And very close to 180 degrees.
    Matrix3d R2(AngleAxisd(M_PI - 1e-9, Vector3d::Unit(axis)));
    auto p2 =
        decompose_pose(Sim3Transform::FromParts(1.0, R2, Vector3d::Zero()));
    CHECK((metrics::rotation_from_quaternion(p2.quaternion) - R2).norm() <
          1e-7);
  }
}

TEST_CASE("pose errors against hand values") {
  auto gt = Sim3Transform::FromParts(1.0, Matrix3d::Identity(),
                                     Vector3d::Zero());
  Matrix3d R(AngleAxisd(10.0 * M_PI / 180.0, Vector3d::UnitX()));
  auto pred = Sim3Transform::FromParts(1.1, R, Vector3d(0.1, 0, 0));
  auto e = pose_errors(pred, gt);
  CHECK(e.translation_m == doctest::Approx(0.1));
  CHECK(e.rotation_deg == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(e.scale_pct == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(pose_errors(gt, gt).rotation_deg == doctest::Approx(0.0));
}

TEST_CASE("rotation error ignores quaternion sign") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i) {
    const Matrix3d R = random_rotation(rng);
    auto T = Sim3Transform::FromParts(1.0, R, Vector3d::Zero());
    auto e = pose_errors(T, T);
    // acos near 1 amplifies rounding; 1e-4 deg is the practical floor.
    CHECK(e.rotation_deg < 1e-4);
  }
}

TEST_CASE("accuracy thresholds are inclusive") {
  metrics::PoseErrors e{0.2, 20.0, 20.0};
  CHECK(metrics::pose_accurate(e));
  e.translation_m = 0.2000001;
  CHECK(!metrics::pose_accurate(e));
  e = {0.0, 20.0000001, 0.0};
  CHECK(!metrics::pose_accurate(e));
  e = {0.0, 0.0, 20.0000001};
  CHECK(!metrics::pose_accurate(e));
  CHECK(metrics::pose_accurate({0.0, 0.0, 0.0}));
}

TEST_CASE("fitting rate hand example") {
  std::vector<Vector3d> est = {{0, 0, 0}, {1, 0, 0}};
  std::vector<Vector3d> gt = {{0.1, 0, 0}, {1.03, 0, 0}, {5, 0, 0},
                              {0, 0.2, 0}};
  // Distances: 0.1, 0.03, 4.0, 0.2 -> three within lambda = 0.2 (inclusive).
  CHECK(metrics::fitting_rate(est, gt) == doctest::Approx(0.75));
  CHECK(metrics::fitting_rate(est, gt, 0.05) == doctest::Approx(0.25));
  // Inclusive boundary with exactly representable values.
  CHECK(metrics::fitting_rate({{0, 0, 0}}, {{0.25, 0, 0}}, 0.25) == 1.0);
  CHECK(metrics::fitting_rate({}, gt) == 0.0);
  CHECK(metrics::fitting_rate(est, est) == doctest::Approx(1.0));
}

TEST_CASE("bbox iou hand examples") {
  auto box = [](Vector3d lo, Vector3d hi) {
    return std::vector<Vector3d>{lo, hi};
  };
  // Identical unit boxes.
  CHECK(metrics::bbox_iou_3d(box({0, 0, 0}, {1, 1, 1}),
                             box({0, 0, 0}, {1, 1, 1})) ==
        doctest::Approx(1.0));
  // Half-overlapping along x: inter 0.5, union 1.5.
  CHECK(metrics::bbox_iou_3d(box({0, 0, 0}, {1, 1, 1}),
                             box({0.5, 0, 0}, {1.5, 1, 1})) ==
        doctest::Approx(1.0 / 3.0));
  // Disjoint.
  CHECK(metrics::bbox_iou_3d(box({0, 0, 0}, {1, 1, 1}),
                             box({2, 2, 2}, {3, 3, 3})) == doctest::Approx(0));
  CHECK(metrics::bbox_iou_3d({}, box({0, 0, 0}, {1, 1, 1})) == 0.0);
}
