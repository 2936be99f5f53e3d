#include "core/lie.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace bisdf::lie {

namespace {

constexpr double kSmall = 1e-6;

// W coefficient matrix of the SIM(3) exponential: t = W * rho.
// W = A*Omega + B*Omega^2 + C*I with coefficients depending on (theta, sigma).
Mat3 sim3_w(const Vec3& theta_vec, double sigma) {
  const double theta = theta_vec.norm();
  const double scale = std::exp(sigma);
  const Mat3 Omega = hat_so3(theta_vec);
  const Mat3 Omega2 = Omega * Omega;
  double A, B, C;
  if (std::abs(sigma) < kSmall) {
    C = 1.0 + sigma / 2.0 + sigma * sigma / 6.0;
    if (theta < kSmall) {
      A = 0.5 + sigma / 3.0;
      B = 1.0 / 6.0 + sigma / 8.0;
    } else {
      const double t2 = theta * theta;
      const double st = std::sin(theta);
      const double ct = std::cos(theta);
      A = (1.0 - ct) / t2 + sigma * (st - theta * ct) / (t2 * theta);
      B = (theta - st) / (t2 * theta) +
          sigma * (t2 / 2.0 + 1.0 - ct - theta * st) / (t2 * t2);
    }
  } else {
    C = (scale - 1.0) / sigma;
    const double s2 = sigma * sigma;
    if (theta < kSmall) {
      A = ((sigma - 1.0) * scale + 1.0) / s2;
      B = ((0.5 * s2 - sigma + 1.0) * scale - 1.0) / (s2 * sigma);
    } else {
      const double a = scale * std::sin(theta);
      const double b = scale * std::cos(theta);
      const double c = theta * theta + s2;
      A = (a * sigma + (1.0 - b) * theta) / (theta * c);
      B = (C - ((b - 1.0) * sigma + a * theta) / c) / (theta * theta);
    }
  }
  return A * Omega + B * Omega2 + C * Mat3::Identity();
}

}  // namespace

Sim3Transform::Sim3Transform(const Mat4& m) : matrix_(m) {
  const double s = std::cbrt(m.block<3, 3>(0, 0).determinant());
  if (!(s > 0.0)) throw DomainError("Sim3Transform: nonpositive scale");
  const Mat3 R = m.block<3, 3>(0, 0) / s;
  if ((R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
    throw DomainError("Sim3Transform: rotation block not orthonormal");
  if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() != 0.0)
    throw DomainError("Sim3Transform: bottom row must be (0,0,0,1)");
  matrix_.row(3) << 0, 0, 0, 1;
}

Sim3Transform Sim3Transform::FromParts(double scale, const Mat3& rotation,
                                       const Vec3& translation) {
  Mat4 m = Mat4::Identity();
  m.block<3, 3>(0, 0) = scale * rotation;
  m.block<3, 1>(0, 3) = translation;
  return Sim3Transform(m);
}

double Sim3Transform::scale() const {
  return std::cbrt(matrix_.block<3, 3>(0, 0).determinant());
}

Mat3 Sim3Transform::rotation() const {
  return matrix_.block<3, 3>(0, 0) / scale();
}

Sim3Transform Sim3Transform::inverse() const {
  const double s = scale();
  const Mat3 R = rotation();
  Mat4 m = Mat4::Identity();
  m.block<3, 3>(0, 0) = R.transpose() / s;
  m.block<3, 1>(0, 3) = -R.transpose() * translation() / s;
  return Sim3Transform(m);
}

Sim3Transform Sim3Transform::operator*(const Sim3Transform& rhs) const {
  return Sim3Transform(Mat4(matrix_ * rhs.matrix_));
}

Vec3 Sim3Transform::apply(const Vec3& x) const {
  return matrix_.block<3, 3>(0, 0) * x + translation();
}

Mat3 hat_so3(const Vec3& t) {
  Mat3 m;
  m << 0, -t.z(), t.y(), t.z(), 0, -t.x(), -t.y(), t.x(), 0;
  return m;
}

Mat4 hat_sim3(const Vec7& xi) {
  Mat4 m = Mat4::Zero();
  m.block<3, 3>(0, 0) = xi(6) * Mat3::Identity() + hat_so3(xi.segment<3>(3));
  m.block<3, 1>(0, 3) = xi.head<3>();
  return m;
}

Mat3 exp_so3(const Vec3& theta_vec) {
  const double theta = theta_vec.norm();
  const Mat3 Omega = hat_so3(theta_vec);
  if (theta < kSmall) {
    // Second-order Taylor keeps orthonormality to well under 1e-12 here.
    return Mat3::Identity() + Omega + 0.5 * Omega * Omega;
  }
  return Mat3::Identity() + std::sin(theta) / theta * Omega +
         (1.0 - std::cos(theta)) / (theta * theta) * Omega * Omega;
}

Vec3 log_so3(const Mat3& R) {
  const double cos_angle =
      std::clamp((R.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double angle = std::acos(cos_angle);
  if (angle >= M_PI - 1e-6)
    throw DomainError("log_so3: rotation angle at or beyond pi");
  if (angle < kSmall) {
    Vec3 w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    return 0.5 * w;
  }
  Vec3 w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  return angle / (2.0 * std::sin(angle)) * w;
}

Sim3Transform exp_sim3(const Vec7& xi) {
  const Vec3 rho = xi.head<3>();
  const Vec3 theta = xi.segment<3>(3);
  const double sigma = xi(6);
  const Mat3 R = exp_so3(theta);
  const Mat3 W = sim3_w(theta, sigma);
  return Sim3Transform::FromParts(std::exp(sigma), R, W * rho);
}

Vec7 log_sim3(const Sim3Transform& T) {
  Vec7 xi;
  const double sigma = std::log(T.scale());
  const Vec3 theta = log_so3(T.rotation());
  const Mat3 W = sim3_w(theta, sigma);
  xi.head<3>() = W.lu().solve(T.translation());
  xi.segment<3>(3) = theta;
  xi(6) = sigma;
  return xi;
}

Sim3Transform retract(const Sim3Transform& T, const Vec7& xi) {
  return exp_sim3(xi) * T;
}

Eigen::Matrix<double, 4, 7> odot(const Eigen::Vector4d& x_hom) {
  Eigen::Matrix<double, 4, 7> m = Eigen::Matrix<double, 4, 7>::Zero();
  const Vec3 x = x_hom.head<3>();
  m.block<3, 3>(0, 0) = Mat3::Identity();
  m.block<3, 3>(0, 3) = -hat_so3(x);
  m.block<3, 1>(0, 6) = x;
  return m;
}

}  // namespace bisdf::lie
