#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "core/optim.hpp"

using namespace bisdf;
using Eigen::Vector3d;
using Eigen::VectorXd;
using lie::Sim3Transform;
using lie::Vec7;
using optim::OptimConfig;
using scene::LabeledPoint;

namespace {

struct RandomSetup {
  decoder::DecoderWeights w;
  VectorXd z;
  VectorXd delta_z;
  Sim3Transform T;
  std::vector<LabeledPoint> pts;
};

RandomSetup make_setup(std::uint64_t seed, int n_points) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  RandomSetup s;
  s.w = decoder::init_weights(8, 16, 8, seed);
  s.z = VectorXd::NullaryExpr(8, [&](int) { return 0.3 * g(rng); });
  s.delta_z = VectorXd::NullaryExpr(8, [&](int) { return 0.1 * g(rng); });
  Vec7 xi;
  for (int i = 0; i < 7; ++i) xi(i) = 0.3 * g(rng);
  s.T = lie::exp_sim3(xi);
  for (int i = 0; i < n_points; ++i) {
    LabeledPoint pt;
    pt.x = Vector3d(g(rng), g(rng), g(rng)) * 0.5;
    pt.d = 0.05 * g(rng);
    s.pts.push_back(pt);
  }
  return s;
}

}  // namespace

TEST_CASE("huber value and derivative") {
  CHECK(optim::huber(0.03, 0.05) == doctest::Approx(0.5 * 0.03 * 0.03));
  CHECK(optim::huber(0.05, 0.05) == doctest::Approx(0.5 * 0.05 * 0.05));
  CHECK(optim::huber(0.2, 0.05) == doctest::Approx(0.05 * (0.2 - 0.025)));
  CHECK(optim::huber(-0.2, 0.05) == doctest::Approx(0.05 * (0.2 - 0.025)));
  CHECK(optim::huber_deriv(0.03, 0.05) == doctest::Approx(0.03));
  CHECK(optim::huber_deriv(0.2, 0.05) == doctest::Approx(0.05));
  CHECK(optim::huber_deriv(-0.2, 0.05) == doctest::Approx(-0.05));
}

TEST_CASE("residual scale convention") {
  // Doubling the object (halving the world->object scale) doubles the
  // world-frame residual for the same object-frame value.
  auto s = make_setup(3, 1);
  s.pts[0].d = 0.0;
  const auto T1 = Sim3Transform::FromParts(1.0, Eigen::Matrix3d::Identity(),
                                           Vector3d::Zero());
  const auto T2 = Sim3Transform::FromParts(0.5, Eigen::Matrix3d::Identity(),
                                           Vector3d::Zero());
  // Evaluate at object points that coincide: x2 = 2 * x1 in world.
  LabeledPoint p1 = s.pts[0], p2 = s.pts[0];
  p2.x = 2.0 * p1.x;
  const double r1 = optim::fine_residual(s.w, s.z, p1, T1, s.delta_z);
  const double r2 = optim::fine_residual(s.w, s.z, p2, T2, s.delta_z);
  CHECK(r2 == doctest::Approx(2.0 * r1).epsilon(1e-12));
}

TEST_CASE("total error breakdown adds up") {
  auto s = make_setup(5, 20);
  OptimConfig cfg;
  auto e = optim::total_error(s.w, s.z, s.pts, s.T, s.delta_z, cfg);
  CHECK(e.total == doctest::Approx(e.fine + e.coarse + e.reg));
  CHECK(e.reg == doctest::Approx(cfg.reg * s.delta_z.squaredNorm()));
  CHECK(e.fine > 0);
  CHECK(e.coarse > 0);

  // Against a direct recompute from the per-point residuals.
  const VectorXd code = s.z + s.delta_z;
  double fine = 0, coarse = 0;
  for (const auto& pt : s.pts) {
    fine += cfg.beta * optim::huber(
                           optim::fine_residual(s.w, s.z, pt, s.T, s.delta_z),
                           cfg.huber_delta);
    coarse += cfg.gamma *
              optim::huber(optim::coarse_residual(s.w, s.z, pt, s.T, s.delta_z),
                           cfg.huber_delta);
  }
  CHECK(e.fine == doctest::Approx(fine));
  CHECK(e.coarse == doctest::Approx(coarse));
}

TEST_CASE("gradients match finite differences") {
  // [oracle] central differences of total_error in the retraction and in
  // delta_z, over many random configurations.
  const double h = 1e-6;
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    auto s = make_setup(seed, 5);
    OptimConfig cfg;
    Vec7 gxi;
    VectorXd gdz;
    optim::error_gradients(s.w, s.z, s.pts, s.T, s.delta_z, cfg, &gxi, &gdz);

    for (int i = 0; i < 7; ++i) {
      Vec7 d = Vec7::Zero();
      d(i) = h;
      const double ep = optim::total_error(s.w, s.z, s.pts,
                                           lie::retract(s.T, d), s.delta_z,
                                           cfg)
                            .total;
      const double em = optim::total_error(s.w, s.z, s.pts,
                                           lie::retract(s.T, (-d).eval()),
                                           s.delta_z, cfg)
                            .total;
      const double fd = (ep - em) / (2 * h);
      CHECK(gxi(i) == doctest::Approx(fd).epsilon(1e-4).scale(1e-4));
      ++checked;
    }
    for (int i = 0; i < gdz.size(); ++i) {
      VectorXd dzp = s.delta_z, dzm = s.delta_z;
      dzp(i) += h;
      dzm(i) -= h;
      const double fd =
          (optim::total_error(s.w, s.z, s.pts, s.T, dzp, cfg).total -
           optim::total_error(s.w, s.z, s.pts, s.T, dzm, cfg).total) /
          (2 * h);
      CHECK(gdz(i) == doctest::Approx(fd).epsilon(1e-4).scale(1e-4));
      ++checked;
    }
  }
  CHECK(checked == 200 * 15);
}

TEST_CASE("optimize stops immediately at a consistent ground truth") {
  // Labels generated by the model itself: the fine term vanishes at the
  // true pose, so with the coarse term off the gradient is exactly zero.
  auto s = make_setup(77, 60);
  OptimConfig cfg;
  cfg.gamma = 0.0;
  const VectorXd code = s.z;
  for (auto& pt : s.pts)
    pt.d = decoder::fine_decode(s.w, s.T.apply(pt.x), code) / s.T.scale();
  auto est = optim::optimize(s.w, s.z, s.pts, s.T, cfg);
  CHECK(est.convergence.iterations <= 2);
  CHECK(est.convergence.converged);
  CHECK(est.convergence.final_error <= 1e-12);
  CHECK((est.world_to_object.matrix() - s.T.matrix()).norm() < 1e-9);
  CHECK(est.delta_z.norm() < 1e-9);
}

TEST_CASE("optimize recovers a perturbed pose") {
  auto s = make_setup(13, 300);
  OptimConfig cfg;
  cfg.gamma = 0.0;
  cfg.max_iters = 400;
  for (auto& pt : s.pts)
    pt.d = decoder::fine_decode(s.w, s.T.apply(pt.x), s.z) / s.T.scale();
  Vec7 bump;
  bump << 0.02, -0.03, 0.01, 0.03, -0.02, 0.02, 0.03;
  const auto T0 = lie::retract(s.T, bump);
  auto est = optim::optimize(s.w, s.z, s.pts, T0, cfg);
  const double e0 = optim::total_error(s.w, s.z, s.pts, T0,
                                       VectorXd::Zero(s.z.size()), cfg)
                        .total;
  CHECK(est.convergence.final_error < 0.05 * e0);
  CHECK(est.convergence.final_error <= est.convergence.initial_error);
}

TEST_CASE("optimize error never increases and large sets are subsampled") {
  auto s = make_setup(29, 200);
  OptimConfig cfg;
  cfg.max_iters = 40;
  cfg.max_points = 50;
  for (auto& pt : s.pts)
    pt.d = decoder::fine_decode(s.w, s.T.apply(pt.x), s.z) / s.T.scale();
  auto est = optim::optimize(s.w, s.z, s.pts, lie::retract(s.T, Vec7::Constant(0.02)), cfg);
  CHECK(est.convergence.final_error <= est.convergence.initial_error);
  // Determinism of the subsample and descent.
  auto est2 = optim::optimize(s.w, s.z, s.pts,
                              lie::retract(s.T, Vec7::Constant(0.02)), cfg);
  CHECK(est2.convergence.final_error == est.convergence.final_error);
  CHECK(est2.world_to_object.matrix() == est.world_to_object.matrix());
}
