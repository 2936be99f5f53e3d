#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bisdf::metrics {

namespace {

// Hamilton (w, x, y, z) with Shepperd's branch selection.
Vector4d hamilton_from_rotation(const Matrix3d& R) {
  const double tr = R.trace();
  Vector4d q;
  if (tr > 0.0) {
    const double w = 0.5 * std::sqrt(tr + 1.0);
    q << w, (R(2, 1) - R(1, 2)) / (4 * w), (R(0, 2) - R(2, 0)) / (4 * w),
        (R(1, 0) - R(0, 1)) / (4 * w);
    return q;
  }
  int k = 0;
  if (R(1, 1) > R(0, 0)) k = 1;
  if (R(2, 2) > R(k, k)) k = 2;
  const int i = k, j = (k + 1) % 3, l = (k + 2) % 3;
  const double s = std::sqrt(R(i, i) - R(j, j) - R(l, l) + 1.0);
  Vector3d v;
  v(i) = 0.5 * s;
  v(j) = (R(j, i) + R(i, j)) / (2 * s);
  v(l) = (R(l, i) + R(i, l)) / (2 * s);
  q << (R(l, j) - R(j, l)) / (2 * s), v(0), v(1), v(2);
  return q;
}

}  // namespace

PoseParts decompose_pose(const Sim3Transform& object_to_world) {
  const Matrix3d Rs = object_to_world.matrix().block<3, 3>(0, 0);
  PoseParts parts;
  Matrix3d R;
  for (int i = 0; i < 3; ++i) {
    parts.scale(i) = Rs.col(i).norm();
    R.col(i) = Rs.col(i) / parts.scale(i);
  }
  Vector4d q = hamilton_from_rotation(R);
  // Trace-formula convention: the vector part is negated relative to
  // Hamilton ((m23 - m32) instead of (m32 - m23)).
  q.tail<3>() = -q.tail<3>();
  if (q(0) < 0) q = -q;
  parts.quaternion = q / q.norm();
  parts.position = object_to_world.translation();
  return parts;
}

Matrix3d rotation_from_quaternion(const Vector4d& q) {
  const double w = q(0), x = -q(1), y = -q(2), z = -q(3);
  Matrix3d R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

PoseErrors pose_errors(const Sim3Transform& predicted,
                       const Sim3Transform& ground_truth) {
  const PoseParts p = decompose_pose(predicted);
  const PoseParts g = decompose_pose(ground_truth);
  PoseErrors e;
  e.translation_m = (p.position - g.position).norm();
  const double dot =
      std::clamp(std::abs(p.quaternion.dot(g.quaternion)), 0.0, 1.0);
  e.rotation_deg = 2.0 * std::acos(dot) * 180.0 / M_PI;
  const Vector3d ratio = p.scale.cwiseQuotient(g.scale);
  e.scale_pct = 100.0 * std::abs(ratio.mean() - 1.0);
  return e;
}

bool pose_accurate(const PoseErrors& e, double max_translation_m,
                   double max_rotation_deg, double max_scale_pct) {
  return e.translation_m <= max_translation_m &&
         e.rotation_deg <= max_rotation_deg && e.scale_pct <= max_scale_pct;
}

double fitting_rate(const std::vector<Vector3d>& estimated,
                    const std::vector<Vector3d>& ground_truth,
                    double lambda) {
  if (ground_truth.empty()) return 0.0;
  if (estimated.empty()) return 0.0;
  const double l2 = lambda * lambda;
  int hits = 0;
  for (const auto& g : ground_truth) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : estimated)
      best = std::min(best, (g - e).squaredNorm());
    if (best <= l2) ++hits;
  }
  return static_cast<double>(hits) / ground_truth.size();
}

double bbox_iou_3d(const std::vector<Vector3d>& a,
                   const std::vector<Vector3d>& b) {
  if (a.empty() || b.empty()) return 0.0;
  auto bounds = [](const std::vector<Vector3d>& pts) {
    Vector3d lo = pts[0], hi = pts[0];
    for (const auto& p : pts) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    return std::pair{lo, hi};
  };
  const auto [alo, ahi] = bounds(a);
  const auto [blo, bhi] = bounds(b);
  const Vector3d ilo = alo.cwiseMax(blo), ihi = ahi.cwiseMin(bhi);
  const Vector3d d = (ihi - ilo).cwiseMax(0.0);
  const double inter = d.prod();
  const double va = (ahi - alo).prod(), vb = (bhi - blo).prod();
  const double uni = va + vb - inter;
  return uni > 0 ? inter / uni : 0.0;
}

}  // namespace bisdf::metrics
