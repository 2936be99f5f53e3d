#include "core/superellipsoid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bisdf::shape {

namespace {

// sign(c) * |c|^e
double spow(double c, double e) {
  if (c == 0.0) return 0.0;
  return std::copysign(std::pow(std::abs(c), e), c);
}

}  // namespace

double Superellipsoid::implicit(const Vector3d& x) const {
  const double gx = std::pow(std::abs(x.x() / a.x()), 2.0 / e2);
  const double gy = std::pow(std::abs(x.y() / a.y()), 2.0 / e2);
  const double gz = std::pow(std::abs(x.z() / a.z()), 2.0 / e1);
  return std::pow(gx + gy, e2 / e1) + gz;
}

double Superellipsoid::radial_norm(const Vector3d& x) const {
  return std::pow(implicit(x), e1 / 2.0);
}

Vector3d Superellipsoid::surface_point(double eta, double omega) const {
  const double ce = std::cos(eta), se = std::sin(eta);
  const double co = std::cos(omega), so = std::sin(omega);
  return {a.x() * spow(ce, e1) * spow(co, e2),
          a.y() * spow(ce, e1) * spow(so, e2), a.z() * spow(se, e1)};
}

Vector3d Superellipsoid::normal(const Vector3d& sx) const {
  const double h = 1e-6;
  Vector3d g;
  for (int i = 0; i < 3; ++i) {
    Vector3d p = sx, m = sx;
    p(i) += h;
    m(i) -= h;
    g(i) = (implicit(p) - implicit(m)) / (2.0 * h);
  }
  const double n = g.norm();
  return n > 0 ? Vector3d(g / n) : Vector3d(0, 0, 1);
}

Vector3d Superellipsoid::closest_point(const Vector3d& x) const {
  // Coarse grid.
  constexpr int kEta = 33, kOmega = 64;
  double best = std::numeric_limits<double>::infinity();
  double beta = 0, bomega = 0;
  for (int i = 0; i < kEta; ++i) {
    const double eta = -M_PI_2 + M_PI * i / (kEta - 1);
    for (int j = 0; j < kOmega; ++j) {
      const double omega = -M_PI + 2.0 * M_PI * j / kOmega;
      const double d2 = (x - surface_point(eta, omega)).squaredNorm();
      if (d2 < best) {
        best = d2;
        beta = eta;
        bomega = omega;
      }
    }
  }
  // Shrinking 5x5 pattern refinement; robust where the parametric
  // derivatives degenerate (poles, flat spots of low exponents).
  double span_e = M_PI / (kEta - 1), span_o = 2.0 * M_PI / kOmega;
  for (int round = 0; round < 40; ++round) {
    double cur_e = beta, cur_o = bomega;
    for (int di = -2; di <= 2; ++di) {
      for (int dj = -2; dj <= 2; ++dj) {
        const double eta =
            std::clamp(cur_e + span_e * di / 2.0, -M_PI_2, M_PI_2);
        const double omega = cur_o + span_o * dj / 2.0;
        const double d2 = (x - surface_point(eta, omega)).squaredNorm();
        if (d2 < best) {
          best = d2;
          beta = eta;
          bomega = omega;
        }
      }
    }
    span_e *= 0.6;
    span_o *= 0.6;
  }
  // Polish in 3D: tangential gradient steps with exact radial re-projection
  // (n is 1-homogeneous, so y / n(y) lies on the surface). The parametric
  // search alone stalls near the poles where omega degenerates.
  auto polish = [&](Vector3d y) {
    double dist = (x - y).norm();
    for (int it = 0; it < 200; ++it) {
      const Vector3d m = normal(y);
      const Vector3d d = y - x;
      const Vector3d gt = d - d.dot(m) * m;
      if (gt.norm() < 1e-13) break;
      double alpha = 1.0;
      bool moved = false;
      for (int h = 0; h < 40; ++h) {
        Vector3d cand = y - alpha * gt;
        cand /= radial_norm(cand);
        const double cd = (x - cand).norm();
        if (cd < dist) {
          y = cand;
          dist = cd;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) break;
    }
    return y;
  };

  Vector3d best_y = polish(surface_point(beta, bomega));
  // Second start from the radial projection, a near-exact guess close to
  // the surface where the grid basin can be wrong.
  const double nx = radial_norm(x);
  if (nx > 1e-12) {
    const Vector3d yr = polish(x / nx);
    if ((x - yr).squaredNorm() < (x - best_y).squaredNorm()) best_y = yr;
  }
  return best_y;
}

double Superellipsoid::sdf(const Vector3d& x) const {
  const double d = (x - closest_point(x)).norm();
  return implicit(x) < 1.0 ? -d : d;
}

double Superellipsoid::radial_norm_lipschitz() const {
  double worst = 0.0;
  const double h = 1e-5;
  for (int i = 1; i < 24; ++i) {
    const double eta = -M_PI_2 + M_PI * i / 24;
    for (int j = 0; j < 48; ++j) {
      const double omega = -M_PI + 2.0 * M_PI * j / 48;
      const Vector3d p = surface_point(eta, omega);
      Vector3d g;
      for (int k = 0; k < 3; ++k) {
        Vector3d pp = p, pm = p;
        pp(k) += h;
        pm(k) -= h;
        g(k) = (radial_norm(pp) - radial_norm(pm)) / (2.0 * h);
      }
      worst = std::max(worst, g.norm());
    }
  }
  return 1.5 * std::max(worst, 1.0 / a.minCoeff());
}

}  // namespace bisdf::shape
