#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>

#include "core/decoder.hpp"

using namespace bisdf::decoder;
using Eigen::Vector3d;

namespace {

// Exact ellipsoid distance oracle: closest point y_i = u_i^2 x_i/(u_i^2+t)
// with t the root of sum_i (u_i x_i/(u_i^2+t))^2 = 1, found by bisection.
double exact_ellipsoid_sdf(const Vector3d& x, const Vector3d& u) {
  auto g = [&](double t) {
    double s = 0;
    for (int i = 0; i < 3; ++i) {
      double w = u(i) * x(i) / (u(i) * u(i) + t);
      s += w * w;
    }
    return s - 1.0;
  };
  const double tmin = -u.cwiseProduct(u).minCoeff();
  double lo, hi;
  if (g(0.0) > 0.0) {  // outside
    lo = 0.0;
    hi = 1.0;
    while (g(hi) > 0.0) hi *= 2.0;
  } else {  // inside
    hi = 0.0;
    lo = tmin + 1e-14;
    for (int i = 0; i < 200 && g(lo) < 0.0; ++i)
      lo = tmin + (lo - tmin) / 2.0;
  }
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  double t = 0.5 * (lo + hi);
  Vector3d y;
  for (int i = 0; i < 3; ++i) y(i) = u(i) * u(i) * x(i) / (u(i) * u(i) + t);
  double dist = (x - y).norm();
  return g(0.0) > 0.0 ? dist : -dist;
}

VectorXd random_vec(int n, std::mt19937_64& rng, double span = 1.0) {
  std::uniform_real_distribution<double> u(-span, span);
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

}  // namespace

TEST_CASE("coarse_decode positivity and zero-final-layer value") {
  DecoderWeights w = init_weights(16, 64, 32, 42);
  w.coarse.layers.back().W.setZero();
  w.coarse.layers.back().b.setConstant(0.3);
  std::mt19937_64 rng(0);
  Vector3d u = coarse_decode(w, random_vec(16, rng));
  const double expected = softplus(0.3);
  CHECK((u.array() - expected).abs().maxCoeff() < 1e-15);
  CHECK(u.minCoeff() > 0.0);
}

TEST_CASE("coarse_decode strictly positive for random weights") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    DecoderWeights w = init_weights(8, 32, 16, 100 + trial);
    Vector3d u = coarse_decode(w, random_vec(8, rng, 3.0));
    CHECK(u.minCoeff() > 0.0);
  }
}

TEST_CASE("coarse_jacobian matches finite differences") {
  DecoderWeights w = init_weights(8, 32, 16, 7);
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd z = random_vec(8, rng);
    auto J = coarse_jacobian(w, z);
    const double eps = 1e-6;
    for (int i = 0; i < 8; ++i) {
      VectorXd zp = z, zm = z;
      zp(i) += eps;
      zm(i) -= eps;
      Vector3d fd = (coarse_decode(w, zp) - coarse_decode(w, zm)) / (2 * eps);
      CHECK((J.col(i) - fd).norm() < 1e-4 * std::max(1.0, fd.norm()));
    }
  }
}

TEST_CASE("fine_gradients match finite differences") {
  DecoderWeights w = init_weights(8, 32, 16, 11);
  std::mt19937_64 rng(3);
  const double eps = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    Vector3d x = random_vec(3, rng);
    VectorXd z = random_vec(8, rng);
    auto [gx, gz] = fine_gradients(w, x, z);
    for (int i = 0; i < 3; ++i) {
      Vector3d xp = x, xm = x;
      xp(i) += eps;
      xm(i) -= eps;
      double fd = (fine_decode(w, xp, z) - fine_decode(w, xm, z)) / (2 * eps);
      CHECK(gx(i) == doctest::Approx(fd).epsilon(1e-4));
    }
    for (int i = 0; i < 8; ++i) {
      VectorXd zp = z, zm = z;
      zp(i) += eps;
      zm(i) -= eps;
      double fd = (fine_decode(w, x, zp) - fine_decode(w, x, zm)) / (2 * eps);
      CHECK(gz(i) == doctest::Approx(fd).epsilon(1e-4));
    }
  }
}

TEST_CASE("all-zero weights give zero gradients") {
  DecoderWeights w = init_weights(4, 8, 8, 0);
  for (auto& l : w.fine.layers) {
    l.W.setZero();
    l.b.setZero();
  }
  auto [gx, gz] = fine_gradients(w, Vector3d(0.1, 0.2, 0.3), VectorXd::Zero(4));
  CHECK(gx.norm() == 0.0);
  CHECK(gz.norm() == 0.0);
}

TEST_CASE("batched evaluation equals per-point evaluation") {
  DecoderWeights w = init_weights(8, 32, 16, 5);
  std::mt19937_64 rng(4);
  VectorXd z = random_vec(8, rng);
  std::vector<Vector3d> pts;
  for (int i = 0; i < 16; ++i) pts.push_back(random_vec(3, rng));
  std::vector<double> once, twice;
  for (auto& p : pts) once.push_back(fine_decode(w, p, z));
  for (auto& p : pts) twice.push_back(fine_decode(w, p, z));
  CHECK(once == twice);
}

TEST_CASE("ellipsoid_sdf exact cases") {
  CHECK(ellipsoid_sdf(Vector3d(2, 0, 0), Vector3d(1, 1, 1)) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ellipsoid_sdf(Vector3d(0, 0.5, 0), Vector3d(1, 1, 1)) ==
        doctest::Approx(-0.5).epsilon(1e-15));
  // Center convention.
  CHECK(ellipsoid_sdf(Vector3d::Zero(), Vector3d(2, 1, 0.5)) == -0.5);
}

TEST_CASE("ellipsoid_sdf sign and zero set") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> us(0.3, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    Vector3d u(us(rng), us(rng), us(rng));
    Vector3d dir = random_vec(3, rng);
    if (dir.norm() < 1e-6) continue;
    dir.normalize();
    // Point on the surface: x = U*dir scaled so |U^-1 x| = 1.
    Vector3d xs = u.cwiseProduct(dir);
    CHECK(std::abs(ellipsoid_sdf(xs, u)) < 1e-12);
    CHECK(ellipsoid_sdf(1.5 * xs, u) > 0.0);
    CHECK(ellipsoid_sdf(0.5 * xs, u) < 0.0);
  }
}

TEST_CASE("ellipsoid_sdf against closest-point oracle") {
  // The approximation is only accurate where the cost function uses it:
  // near the surface. Far from the surface it degrades badly off-axis
  // (errors above 1 for u = (2,1,0.5)), so the accuracy bound is checked
  // on the near-surface band while the sign is checked everywhere.
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> ux(-3.0, 3.0);
  Vector3d u(2.0, 1.0, 0.5);
  double worst = 0.0;
  int in_band = 0;
  for (int i = 0; in_band < 1000; ++i) {
    Vector3d x(ux(rng), ux(rng), ux(rng));
    if (x.norm() < 1e-3) continue;
    const double exact = exact_ellipsoid_sdf(x, u);
    CHECK(ellipsoid_sdf(x, u) * exact >= 0.0);
    if (std::abs(exact) > 0.2) continue;
    ++in_band;
    worst = std::max(worst, std::abs(ellipsoid_sdf(x, u) - exact));
  }
  CHECK(worst < 0.08 * u.maxCoeff());
}

TEST_CASE("ellipsoid_sdf_gradient matches finite differences") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ux(-2.0, 2.0);
  std::uniform_real_distribution<double> us(0.4, 2.0);
  const double eps = 1e-6;
  int checked = 0;
  while (checked < 100) {
    Vector3d x(ux(rng), ux(rng), ux(rng));
    Vector3d u(us(rng), us(rng), us(rng));
    if (x.norm() < 0.05) continue;
    // Skip axis-degenerate points where |h'| blows up.
    if (x.cwiseAbs().minCoeff() < 0.05) continue;
    ++checked;
    auto [dx, du] = ellipsoid_sdf_gradient(x, u);
    for (int i = 0; i < 3; ++i) {
      Vector3d xp = x, xm = x;
      xp(i) += eps;
      xm(i) -= eps;
      double fd = (ellipsoid_sdf(xp, u) - ellipsoid_sdf(xm, u)) / (2 * eps);
      CHECK(dx(i) == doctest::Approx(fd).epsilon(1e-5));
      Vector3d up = u, um = u;
      up(i) += eps;
      um(i) -= eps;
      fd = (ellipsoid_sdf(x, up) - ellipsoid_sdf(x, um)) / (2 * eps);
      CHECK(du(i) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("ellipsoid_sdf Euler homogeneity") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ux(-2.0, 2.0);
  std::uniform_real_distribution<double> us(0.4, 2.0);
  for (int i = 0; i < 200; ++i) {
    Vector3d x(ux(rng), ux(rng), ux(rng));
    Vector3d u(us(rng), us(rng), us(rng));
    if (x.norm() < 0.05) continue;
    // h(cx, cu) = c h(x, u).
    CHECK(ellipsoid_sdf(2.0 * x, 2.0 * u) ==
          doctest::Approx(2.0 * ellipsoid_sdf(x, u)).epsilon(1e-12));
    // Differential form: x . grad_x h + u . grad_u h = h.
    auto [dx, du] = ellipsoid_sdf_gradient(x, u);
    CHECK(x.dot(dx) + u.dot(du) ==
          doctest::Approx(ellipsoid_sdf(x, u)).epsilon(1e-9));
  }
}

TEST_CASE("radial gradient on the sphere") {
  auto [dx, du] = ellipsoid_sdf_gradient(Vector3d(2, 0, 0), Vector3d(1, 1, 1));
  CHECK((dx - Vector3d(1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("sample_code") {
  VectorXd mu(3), sigma(3);
  mu << 1.0, -2.0, 0.5;
  sigma << 1e-12, 1e-12, 1e-12;
  CHECK((sample_code(mu, sigma, 1) - mu).norm() < 1e-9);

  sigma << 0.5, 1.0, 2.0;
  CHECK((sample_code(mu, sigma, 99) - sample_code(mu, sigma, 99)).norm() ==
        0.0);

  VectorXd m1(1), s1(1);
  m1 << 0.7;
  s1 << 1.3;
  double sum = 0, sumsq = 0;
  const int N = 100000;
  for (int i = 0; i < N; ++i) {
    double z = sample_code(m1, s1, 1000 + i)(0);
    sum += z;
    sumsq += z * z;
  }
  double mean = sum / N;
  double stddev = std::sqrt(sumsq / N - mean * mean);
  CHECK(std::abs(mean - 0.7) < 0.02 * 1.3 + 0.02);
  CHECK(std::abs(stddev - 1.3) < 0.02 * 1.3);
}

TEST_CASE("weights round trip through file within float32 precision") {
  DecoderWeights w = init_weights(8, 16, 8, 77);
  std::vector<LatentCode> codes;
  std::mt19937_64 rng(9);
  for (int i = 0; i < 3; ++i) {
    LatentCode c = LatentCode::Zero(8);
    c.mu = random_vec(8, rng);
    c.sigma = random_vec(8, rng).cwiseAbs() + 0.1 * VectorXd::Ones(8);
    codes.push_back(c);
  }
  auto path = std::filesystem::temp_directory_path() / "bisdf_w_test.bsw";
  save_weights(w, path.string(), &codes);
  std::vector<LatentCode> codes2;
  DecoderWeights w2 = load_weights(path.string(), &codes2);
  CHECK(w2.latent_dim == 8);
  REQUIRE(codes2.size() == 3);
  for (std::size_t i = 0; i < w.fine.layers.size(); ++i)
    CHECK((w.fine.layers[i].W - w2.fine.layers[i].W).cwiseAbs().maxCoeff() <
          1e-6);
  CHECK((codes[1].mu - codes2[1].mu).cwiseAbs().maxCoeff() < 1e-6);
  // A reloaded file is bit-identical when saved again.
  auto path2 = std::filesystem::temp_directory_path() / "bisdf_w_test2.bsw";
  save_weights(w2, path2.string(), &codes2);
  DecoderWeights w3 = load_weights(path2.string());
  for (std::size_t i = 0; i < w2.fine.layers.size(); ++i)
    CHECK((w2.fine.layers[i].W - w3.fine.layers[i].W).norm() == 0.0);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("dimension mismatch raises shape error") {
  DecoderWeights w = init_weights(8, 16, 8, 1);
  CHECK_THROWS_AS(fine_decode(w, Vector3d::Zero(), VectorXd::Zero(5)),
                  ShapeError);
  CHECK_THROWS_AS(coarse_decode(w, VectorXd::Zero(5)), ShapeError);
}
