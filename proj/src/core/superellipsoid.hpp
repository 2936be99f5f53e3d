#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace bisdf::shape {

using Eigen::Vector3d;

// Superellipsoid with semi-axes a and exponents (e1 north-south, e2
// east-west). Implicit F(x) = ((|x/a1|^(2/e2) + |y/a2|^(2/e2))^(e2/e1)
// + |z/a3|^(2/e1)); F < 1 inside. F is positively homogeneous in the sense
// F(x/t) = t^(-2/e1) F(x), so n(x) = F^(e1/2) is a 1-homogeneous radial
// norm with n = 1 on the surface.
struct Superellipsoid {
  Vector3d a = Vector3d(0.5, 0.5, 0.5);
  double e1 = 1.0;
  double e2 = 1.0;

  double implicit(const Vector3d& x) const;
  double radial_norm(const Vector3d& x) const;  // F^(e1/2)

  // Parametric surface point, eta in [-pi/2, pi/2], omega in [-pi, pi].
  Vector3d surface_point(double eta, double omega) const;

  // Outward unit normal from the implicit gradient (finite differences).
  Vector3d normal(const Vector3d& surface_x) const;

  // Signed distance by closest-point search (coarse parametric grid plus
  // shrinking pattern refinement); accurate to ~1e-9 for the exponent range
  // used here.
  double sdf(const Vector3d& x) const;
  Vector3d closest_point(const Vector3d& x) const;

  // Upper bound on the Lipschitz constant of radial_norm, estimated from a
  // surface grid with margin; (n-1)/L is then a safe sphere-tracing step.
  double radial_norm_lipschitz() const;

  // Surface lies inside the box [-a, a], so the corner norm bounds it for
  // any exponents.
  double bounding_radius() const { return a.norm(); }
};

}  // namespace bisdf::shape
