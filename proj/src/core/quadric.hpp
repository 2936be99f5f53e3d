#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "core/lie.hpp"

namespace bisdf::quadric {

using lie::Mat3;
using lie::Mat4;
using lie::Sim3Transform;
using lie::Vec3;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec10 = Eigen::Matrix<double, 10, 1>;
using Mat6x10 = Eigen::Matrix<double, 6, 10>;

class DegenerateObservationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class InsufficientViewsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class AmbiguousSolutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NonEllipsoidError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ellipse fitted to a segmentation mask in normalized pixel coordinates.
struct FittedEllipse {
  Vec2 center = Vec2::Zero();
  Mat2 shape = Mat2::Identity();    // E, symmetric positive definite
  Mat3 dual_conic = Mat3::Zero();   // H* = [E - cc^T, -c; -c^T, -1]
};

// vech serializes the lower triangle column-major:
// 4x4: (0,0),(1,0),(2,0),(3,0),(1,1),(2,1),(3,1),(2,2),(3,2),(3,3)
// 3x3: (0,0),(1,0),(2,0),(1,1),(2,1),(2,2)
Vec10 vech4(const Mat4& m);
Mat4 unvech4(const Vec10& v);
Vec6 vech3(const Mat3& m);
Mat3 unvech3(const Vec6& v);

struct DualQuadric {
  Mat4 Q_star = Mat4::Zero();

  Vec10 vech() const { return vech4(Q_star); }
  static DualQuadric FromVech(const Vec10& v) { return {unvech4(v)}; }

  // Normalized so Q*[3][3] == -1.
  DualQuadric normalized() const;
  Vec3 center() const;  // -Q*[0:3,3] of the normalized matrix
  // P Q* P^T + t t^T, the s^2 R U^2 R^T factor.
  Mat3 shape_matrix() const;
  bool is_ellipsoid(double tol = 1e-8) const;
};

// SE(3) camera pose, optical frame to world.
struct CameraFrame {
  Mat4 pose = Mat4::Identity();
  int view_id = 0;
};

CameraFrame make_camera(const Mat4& pose, int view_id);

// Eq-13 moments fit: c = mean, E = (2/|mask|) * scatter.
FittedEllipse fit_ellipse(const std::vector<Vec2>& mask);

// 6x10 G with vech(P C^-1 Q* C^-T P^T) = G vech(Q*) for all symmetric Q*.
Mat6x10 projection_operator(const CameraFrame& camera);

// Stacked homogeneous system M w = 0 with w = (vech(Q*), beta_1..beta_K).
// With center_constrained, two extra rows per view tie the reprojected
// ellipsoid center to the fitted ellipse center.
Eigen::MatrixXd build_system(const std::vector<FittedEllipse>& ellipses,
                             const std::vector<CameraFrame>& cameras,
                             bool center_constrained = true);

DualQuadric solve_dual_quadric(const Eigen::MatrixXd& M);

struct RecoveredPose {
  Sim3Transform object_to_world;  // T_hat^{-1}, factored (s_hat, R_hat, t_hat)
  bool rotation_ambiguous = false;  // two semi-axes (nearly) equal
};

// Recovers (s, R, t) of the similarity placing the canonical ellipsoid with
// semi-axes u at the estimated dual quadric. candidate_score, when given,
// picks among the four det-+1 axis-flip candidates (lower is better);
// otherwise the candidate with minimal rotation angle wins.
RecoveredPose recover_pose(
    const DualQuadric& Q_hat, const Vec3& u,
    const std::function<double(const Sim3Transform&)>& candidate_score = {});

}  // namespace bisdf::quadric
