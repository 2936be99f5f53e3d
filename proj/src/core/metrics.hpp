#pragma once

#include <vector>

#include <Eigen/Core>

#include "core/lie.hpp"

namespace bisdf::metrics {

using Eigen::Matrix3d;
using Eigen::Vector3d;
using Eigen::Vector4d;
using lie::Sim3Transform;

// Per-axis scale, unit quaternion (w, x, y, z with w >= 0) and position of
// an object-to-world similarity. The quaternion follows the trace formula
// q1 = (m23 - m32) / (4 q0) with the largest-diagonal fallback when the
// trace is unusable.
struct PoseParts {
  Vector3d scale;
  Vector4d quaternion;
  Vector3d position;
};

PoseParts decompose_pose(const Sim3Transform& object_to_world);

// Inverse of decompose_pose's quaternion convention.
Matrix3d rotation_from_quaternion(const Vector4d& q);

struct PoseErrors {
  double translation_m = 0;
  double rotation_deg = 0;
  double scale_pct = 0;
};

PoseErrors pose_errors(const Sim3Transform& predicted,
                       const Sim3Transform& ground_truth);

// Thresholds are inclusive: 0.2 m, 20 deg, 20 %.
bool pose_accurate(const PoseErrors& e, double max_translation_m = 0.2,
                   double max_rotation_deg = 20.0,
                   double max_scale_pct = 20.0);

// Fraction of ground-truth points within lambda of the closest estimated
// point (one-sided chamfer test), lambda = 0.2 by default.
double fitting_rate(const std::vector<Vector3d>& estimated,
                    const std::vector<Vector3d>& ground_truth,
                    double lambda = 0.2);

// Intersection over union of the axis-aligned bounding boxes of two point
// sets.
double bbox_iou_3d(const std::vector<Vector3d>& a,
                   const std::vector<Vector3d>& b);

}  // namespace bisdf::metrics
