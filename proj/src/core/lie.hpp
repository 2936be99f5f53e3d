#pragma once

#include <Eigen/Core>
#include <stdexcept>

namespace bisdf::lie {

// Tangent ordering is (rho, theta, sigma): translational, rotational, log-scale.
using Vec3 = Eigen::Vector3d;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Similarity transform stored as the 4x4 matrix [sR, t; 0 1].
class Sim3Transform {
 public:
  Sim3Transform() : matrix_(Mat4::Identity()) {}
  explicit Sim3Transform(const Mat4& m);
  static Sim3Transform FromParts(double scale, const Mat3& rotation,
                                 const Vec3& translation);

  const Mat4& matrix() const { return matrix_; }
  double scale() const;
  Mat3 rotation() const;
  Vec3 translation() const { return matrix_.block<3, 1>(0, 3); }

  Sim3Transform inverse() const;
  Sim3Transform operator*(const Sim3Transform& rhs) const;

  // Applies the transform to a 3D point.
  Vec3 apply(const Vec3& x) const;

 private:
  Mat4 matrix_;
};

Mat3 hat_so3(const Vec3& theta);

// hat of a 7-vector tangent: [sigma*I + theta_x, rho; 0 0].
Mat4 hat_sim3(const Vec7& xi);

Sim3Transform exp_sim3(const Vec7& xi);

// Inverse of exp_sim3. Throws DomainError when the rotation angle is at or
// beyond pi - 1e-6 (branch is ambiguous there).
Vec7 log_sim3(const Sim3Transform& T);

// Left perturbation: exp(xi) * T.
Sim3Transform retract(const Sim3Transform& T, const Vec7& xi);

// 4x7 matrix with hat(xi) * x_hom == odot(x_hom) * xi for homogeneous x
// (x_hom[3] must be 1).
Eigen::Matrix<double, 4, 7> odot(const Eigen::Vector4d& x_hom);

// SO(3) helpers shared by exp/log and the metrics module.
Mat3 exp_so3(const Vec3& theta);
Vec3 log_so3(const Mat3& R);

}  // namespace bisdf::lie
