#include "core/quadric.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <Eigen/Dense>

namespace bisdf::quadric {

namespace {

constexpr std::array<std::pair<int, int>, 10> kVech4Index = {{
    {0, 0}, {1, 0}, {2, 0}, {3, 0}, {1, 1}, {2, 1}, {3, 1}, {2, 2}, {3, 2},
    {3, 3},
}};
constexpr std::array<std::pair<int, int>, 6> kVech3Index = {{
    {0, 0}, {1, 0}, {2, 0}, {1, 1}, {2, 1}, {2, 2},
}};

}  // namespace

Vec10 vech4(const Mat4& m) {
  Vec10 v;
  for (int j = 0; j < 10; ++j) v(j) = m(kVech4Index[j].first, kVech4Index[j].second);
  return v;
}

Mat4 unvech4(const Vec10& v) {
  Mat4 m;
  for (int j = 0; j < 10; ++j) {
    auto [r, c] = kVech4Index[j];
    m(r, c) = v(j);
    m(c, r) = v(j);
  }
  return m;
}

Vec6 vech3(const Mat3& m) {
  Vec6 v;
  for (int j = 0; j < 6; ++j) v(j) = m(kVech3Index[j].first, kVech3Index[j].second);
  return v;
}

Mat3 unvech3(const Vec6& v) {
  Mat3 m;
  for (int j = 0; j < 6; ++j) {
    auto [r, c] = kVech3Index[j];
    m(r, c) = v(j);
    m(c, r) = v(j);
  }
  return m;
}

DualQuadric DualQuadric::normalized() const {
  if (std::abs(Q_star(3, 3)) < 1e-15)
    throw NonEllipsoidError("dual quadric has zero (3,3) entry");
  return {Mat4(Q_star / -Q_star(3, 3))};
}

Vec3 DualQuadric::center() const {
  Mat4 q = normalized().Q_star;
  return -q.block<3, 1>(0, 3);
}

Mat3 DualQuadric::shape_matrix() const {
  Mat4 q = normalized().Q_star;
  Vec3 t = -q.block<3, 1>(0, 3);
  return q.block<3, 3>(0, 0) + t * t.transpose();
}

bool DualQuadric::is_ellipsoid(double tol) const {
  if (std::abs(Q_star(3, 3)) < 1e-15) return false;
  Eigen::SelfAdjointEigenSolver<Mat3> es(shape_matrix());
  return es.eigenvalues().minCoeff() > tol;
}

CameraFrame make_camera(const Mat4& pose, int view_id) {
  Mat3 R = pose.block<3, 3>(0, 0);
  if ((R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("camera pose rotation not orthonormal");
  return {pose, view_id};
}

FittedEllipse fit_ellipse(const std::vector<Vec2>& mask) {
  if (mask.size() < 5)
    throw DegenerateObservationError("mask has fewer than 5 pixels");
  Vec2 c = Vec2::Zero();
  for (const auto& p : mask) c += p;
  c /= static_cast<double>(mask.size());
  Mat2 scatter = Mat2::Zero();
  for (const auto& p : mask) scatter += (p - c) * (p - c).transpose();
  Mat2 E = 2.0 / static_cast<double>(mask.size()) * scatter;
  Eigen::SelfAdjointEigenSolver<Mat2> es(E);
  if (es.eigenvalues().minCoeff() < 1e-12)
    throw DegenerateObservationError("mask is (nearly) collinear");
  FittedEllipse out;
  out.center = c;
  out.shape = E;
  out.dual_conic.block<2, 2>(0, 0) = E - c * c.transpose();
  out.dual_conic.block<2, 1>(0, 2) = -c;
  out.dual_conic.block<1, 2>(2, 0) = -c.transpose();
  out.dual_conic(2, 2) = -1.0;
  return out;
}

Mat6x10 projection_operator(const CameraFrame& camera) {
  // B = P C^{-1}; the map v -> vech(B unvech(v) B^T) is linear, so its
  // matrix is assembled column by column from the symmetric basis.
  Eigen::Matrix<double, 3, 4> B =
      camera.pose.inverse().topRows<3>();
  Mat6x10 G;
  for (int j = 0; j < 10; ++j) {
    Vec10 e = Vec10::Zero();
    e(j) = 1.0;
    G.col(j) = vech3(B * unvech4(e) * B.transpose());
  }
  return G;
}

Eigen::MatrixXd build_system(const std::vector<FittedEllipse>& ellipses,
                             const std::vector<CameraFrame>& cameras,
                             bool center_constrained) {
  const int K = static_cast<int>(cameras.size());
  if (K < 3 || ellipses.size() != cameras.size())
    throw InsufficientViewsError("need at least 3 views");
  const int rows_per_view = center_constrained ? 8 : 6;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(rows_per_view * K, 10 + K);
  for (int k = 0; k < K; ++k) {
    const Mat6x10 G = projection_operator(cameras[k]);
    const Vec6 h = vech3(ellipses[k].dual_conic);
    const int r0 = rows_per_view * k;
    M.block<6, 10>(r0, 0) = G;
    M.block<6, 1>(r0, 10 + k) = -h;
    if (center_constrained) {
      // Projected conic W = beta H*: W(2,0) = -beta c_x, W(2,2) = -beta, so
      // W(2,0) - c_x W(2,2) = 0 and likewise for y. vech3 rows 2, 4, 5.
      const Vec2 c = ellipses[k].center;
      M.block<1, 10>(r0 + 6, 0) = G.row(2) - c.x() * G.row(5);
      M.block<1, 10>(r0 + 7, 0) = G.row(4) - c.y() * G.row(5);
    }
  }
  return M;
}

DualQuadric solve_dual_quadric(const Eigen::MatrixXd& M) {
  if (M.cols() < 10)
    throw std::invalid_argument("system must have at least 10 columns");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const int n = static_cast<int>(sv.size());
  if (n >= 2 && (sv(n - 2) - sv(n - 1)) < 1e-9 * sv(0))
    throw AmbiguousSolutionError("null space is not one-dimensional");
  Vec10 v = svd.matrixV().col(n - 1).head<10>();
  DualQuadric q = DualQuadric{unvech4(v)}.normalized();
  if (!q.is_ellipsoid())
    throw NonEllipsoidError("recovered dual quadric is not an ellipsoid");
  return q;
}

namespace {

double rotation_angle(const Mat3& R) {
  return std::acos(std::clamp((R.trace() - 1.0) / 2.0, -1.0, 1.0));
}

}  // namespace

RecoveredPose recover_pose(
    const DualQuadric& Q_hat, const Vec3& u,
    const std::function<double(const Sim3Transform&)>& candidate_score) {
  if (!(u.minCoeff() > 0.0))
    throw std::invalid_argument("semi-axes must be positive");
  const DualQuadric q = Q_hat.normalized();
  const Vec3 t = q.center();
  const Mat3 A = q.shape_matrix();

  Eigen::SelfAdjointEigenSolver<Mat3> es(A);
  if (es.eigenvalues().minCoeff() < -1e-8)
    throw NonEllipsoidError("shape matrix has a negative eigenvalue");
  Vec3 lam = es.eigenvalues().cwiseMax(0.0);
  Mat3 V = es.eigenvectors();

  // Match eigenpairs to the semi-axis ordering: A = s^2 R U^2 R^T, so the
  // matched lambda_i / u_i^2 should be a common s^2. Pick the permutation
  // with the most consistent ratios; ties go to the smaller rotation.
  std::array<std::array<int, 3>, 6> perms = {
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  double best_residual = std::numeric_limits<double>::infinity();
  std::vector<std::array<int, 3>> best_perms;
  for (const auto& p : perms) {
    Vec3 ratio(lam(p[0]) / (u(0) * u(0)), lam(p[1]) / (u(1) * u(1)),
               lam(p[2]) / (u(2) * u(2)));
    const double mean = ratio.mean();
    const double res = (ratio.array() - mean).matrix().squaredNorm() /
                       std::max(mean * mean, 1e-30);
    if (res < best_residual - 1e-12) {
      best_residual = res;
      best_perms.assign(1, p);
    } else if (res < best_residual + 1e-12) {
      best_perms.push_back(p);
    }
  }

  RecoveredPose out;
  double best_cand = std::numeric_limits<double>::infinity();
  for (const auto& p : best_perms) {
    Mat3 Vp;
    for (int i = 0; i < 3; ++i) Vp.col(i) = V.col(p[i]);
    Vec3 lam_p(lam(p[0]), lam(p[1]), lam(p[2]));
    const double s_hat =
        std::sqrt((lam_p.array() / u.array().square()).sum() / 3.0);
    if (!(s_hat > 0.0)) throw NonEllipsoidError("degenerate recovered scale");
    // Four det-+1 sign patterns of the eigenvector columns.
    const double d = Vp.determinant();
    for (int bits = 0; bits < 4; ++bits) {
      Vec3 signs(bits & 1 ? -1.0 : 1.0, bits & 2 ? -1.0 : 1.0, 1.0);
      signs(2) = d * signs(0) * signs(1) > 0 ? 1.0 : -1.0;
      Mat3 R = Vp * signs.asDiagonal();
      Sim3Transform cand = Sim3Transform::FromParts(s_hat, R, t);
      const double score =
          candidate_score ? candidate_score(cand) : rotation_angle(R);
      if (score < best_cand) {
        best_cand = score;
        out.object_to_world = cand;
      }
    }
  }

  Vec3 su = u;
  std::sort(su.data(), su.data() + 3);
  out.rotation_ambiguous =
      (su(1) - su(0)) < 1e-6 * su(2) || (su(2) - su(1)) < 1e-6 * su(2);
  return out;
}

}  // namespace bisdf::quadric
