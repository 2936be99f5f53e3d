#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "core/trainer.hpp"

using namespace bisdf;
using trainer::AdamState;
using trainer::FamilyParams;
using trainer::TrainConfig;
using Eigen::Vector3d;
using Eigen::VectorXd;

TEST_CASE("adam matches scalar recurrence") {
  // Independent scalar recompute of the update rule, 20 steps.
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  const int dim = 5;
  VectorXd p = VectorXd::Zero(dim);
  std::vector<double> px(dim, 0.0), m(dim, 0.0), v(dim, 0.0);
  AdamState st;
  const double lr = 1e-2;
  for (int t = 1; t <= 20; ++t) {
    VectorXd grad(dim);
    for (int i = 0; i < dim; ++i) grad(i) = g(rng);
    trainer::adam_step(p, grad, st, lr);
    for (int i = 0; i < dim; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * grad(i);
      v[i] = 0.999 * v[i] + 0.001 * grad(i) * grad(i);
      const double mh = m[i] / (1.0 - std::pow(0.9, t));
      const double vh = v[i] / (1.0 - std::pow(0.999, t));
      px[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
      CHECK(p(i) == doctest::Approx(px[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("adam first step moves by lr in gradient sign") {
  VectorXd p = VectorXd::Zero(3);
  VectorXd grad(3);
  grad << 4.0, -0.25, 0.0;
  AdamState st;
  trainer::adam_step(p, grad, st, 1e-3);
  // Bias-corrected first step is lr * g / (|g| + eps), sign(g) scaled.
  CHECK(p(0) == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(p(1) == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK(p(2) == 0.0);
}

TEST_CASE("kl divergence closed form") {
  VectorXd mu = VectorXd::Zero(4), sigma = VectorXd::Ones(4);
  CHECK(trainer::kl_divergence(mu, sigma) == doctest::Approx(0.0));
  mu << 0.5, -1.0, 0.0, 2.0;
  sigma << 1.0, 0.5, 2.0, 1.0;
  double expect = 0.0;
  for (int i = 0; i < 4; ++i)
    expect += 0.5 * (sigma(i) * sigma(i) + mu(i) * mu(i) - 1.0 -
                     2.0 * std::log(sigma(i)));
  CHECK(trainer::kl_divergence(mu, sigma) == doctest::Approx(expect));
}

TEST_CASE("corpus is deterministic per seed") {
  FamilyParams fam;
  auto c1 = trainer::generate_corpus(2, fam, 42);
  auto c2 = trainer::generate_corpus(2, fam, 42);
  REQUIRE(c1.size() == c2.size());
  for (size_t i = 0; i < c1.size(); ++i) {
    CHECK(c1[i].shape.a == c2[i].shape.a);
    CHECK(c1[i].shape.e1 == c2[i].shape.e1);
    REQUIRE(c1[i].coarse_points.size() == c2[i].coarse_points.size());
    REQUIRE(c1[i].fine_points.size() == c2[i].fine_points.size());
    for (size_t k = 0; k < c1[i].coarse_points.size(); ++k) {
      CHECK(c1[i].coarse_points[k] == c2[i].coarse_points[k]);
      CHECK(c1[i].coarse_labels[k] == c2[i].coarse_labels[k]);
    }
    for (size_t k = 0; k < c1[i].fine_points.size(); ++k) {
      CHECK(c1[i].fine_points[k] == c2[i].fine_points[k]);
      CHECK(c1[i].fine_labels[k] == c2[i].fine_labels[k]);
    }
  }
  auto c3 = trainer::generate_corpus(1, fam, 43);
  CHECK(c3[0].shape.a != c1[0].shape.a);
}

TEST_CASE("corpus sizes and label bounds") {
  FamilyParams fam;
  auto corpus = trainer::generate_corpus(1, fam, 5);
  REQUIRE(corpus.size() == 1);
  const auto& inst = corpus[0];
  CHECK(inst.coarse_points.size() == 4096);
  CHECK(inst.fine_points.size() == 8192);
  CHECK(inst.shape.a.minCoeff() >= 0.05);
  for (size_t k = 0; k < inst.fine_points.size(); ++k) {
    CHECK(std::abs(inst.fine_labels[k]) <= 0.05 + 1e-6);
    CHECK(inst.fine_points[k].norm() <= 1.0);
  }
  for (size_t k = 0; k < inst.coarse_points.size(); ++k)
    CHECK(inst.coarse_points[k].norm() <= 1.0);
}

TEST_CASE("sphere corpus labels match the closed form") {
  FamilyParams fam;
  fam.axis_min = fam.axis_max = 0.5;
  fam.exp_min = fam.exp_max = 1.0;
  auto corpus = trainer::generate_corpus(1, fam, 11);
  const auto& inst = corpus[0];
  for (size_t k = 0; k < inst.coarse_points.size(); ++k) {
    const double exact = inst.coarse_points[k].norm() - 0.5;
    CHECK(std::abs(inst.coarse_labels[k] - exact) < 1e-6);
  }
  for (size_t k = 0; k < inst.fine_points.size(); ++k) {
    const double exact = inst.fine_points[k].norm() - 0.5;
    CHECK(std::abs(inst.fine_labels[k] - exact) < 1e-6);
  }
}

TEST_CASE("training a single sphere reaches the accuracy floor") {
  FamilyParams fam;
  fam.axis_min = fam.axis_max = 0.5;
  fam.exp_min = fam.exp_max = 1.0;
  auto corpus = trainer::generate_corpus(1, fam, 3);

  TrainConfig cfg;
  cfg.epochs = 500;
  cfg.seed = 1;
  auto res = trainer::train(corpus, cfg);

  REQUIRE(res.codes.size() == 1);
  REQUIRE(static_cast<int>(res.trace.size()) == cfg.epochs);
  const double med = trainer::surface_residual(
      res.weights, res.codes[0].mu, corpus[0].shape, 500, 99, true);
  MESSAGE("median surface |f| = " << med);
  CHECK(med < 0.02);

  const Vector3d u = decoder::coarse_decode(res.weights, res.codes[0].mu);
  MESSAGE("coarse semi-axes " << u.transpose());
  for (int i = 0; i < 3; ++i) CHECK(std::abs(u(i) - 0.5) < 0.15 * 0.5);

  // Loss should drop substantially from the first epoch.
  CHECK(res.trace.back().fine < 0.5 * res.trace.front().fine);
}

TEST_CASE("training is deterministic per seed") {
  FamilyParams fam;
  auto corpus = trainer::generate_corpus(1, fam, 8);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 4;
  auto r1 = trainer::train(corpus, cfg);
  auto r2 = trainer::train(corpus, cfg);
  CHECK(r1.codes[0].mu == r2.codes[0].mu);
  CHECK(r1.codes[0].sigma == r2.codes[0].sigma);
  for (size_t l = 0; l < r1.weights.fine.layers.size(); ++l)
    CHECK(r1.weights.fine.layers[l].W == r2.weights.fine.layers[l].W);
  for (size_t l = 0; l < r1.weights.coarse.layers.size(); ++l)
    CHECK(r1.weights.coarse.layers[l].W == r2.weights.coarse.layers[l].W);
  CHECK(r1.trace.back().fine == r2.trace.back().fine);
}

TEST_CASE("superellipsoid sphere sdf is exact") {
  shape::Superellipsoid s;  // a = 0.5, e = 1
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Vector3d p(u(rng), u(rng), u(rng));
    CHECK(std::abs(s.sdf(p) - (p.norm() - 0.5)) < 1e-6);
  }
}

TEST_CASE("superellipsoid ellipsoid axis points") {
  shape::Superellipsoid s;
  s.a = Vector3d(0.4, 0.3, 0.2);
  CHECK(s.sdf(Vector3d(1.0, 0, 0)) == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(s.sdf(Vector3d(0, 0.3, 0)) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(s.sdf(Vector3d(0, 0, 0.5)) == doctest::Approx(0.3).epsilon(1e-6));
  // Box family (e -> small) stays inside the bounding radius.
  s.e1 = s.e2 = 0.8;
  for (double eta = -1.5; eta <= 1.5; eta += 0.1)
    for (double om = -3.1; om <= 3.1; om += 0.1)
      CHECK(s.surface_point(eta, om).norm() <= s.bounding_radius() + 1e-12);
}

TEST_CASE("superellipsoid radial norm homogeneity") {
  shape::Superellipsoid s;
  s.a = Vector3d(0.45, 0.25, 0.35);
  s.e1 = 1.3;
  s.e2 = 0.9;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    Vector3d p(u(rng), u(rng), u(rng));
    if (p.norm() < 1e-3) continue;
    const double c = 0.25 + 2.0 * (u(rng) + 1.0);
    CHECK(s.radial_norm(c * p) ==
          doctest::Approx(c * s.radial_norm(p)).epsilon(1e-9));
    // The Lipschitz bound really bounds the directional change.
    const double L = s.radial_norm_lipschitz();
    Vector3d q(u(rng), u(rng), u(rng));
    CHECK(std::abs(s.radial_norm(p) - s.radial_norm(p + 0.01 * q.normalized())) <=
          0.01 * L + 1e-9);
  }
}

TEST_CASE("nan in corpus labels aborts training") {
  FamilyParams fam;
  auto corpus = trainer::generate_corpus(1, fam, 9);
  for (auto& l : corpus[0].fine_labels) l = std::nan("");
  TrainConfig cfg;
  cfg.epochs = 3;
  CHECK_THROWS_AS(trainer::train(corpus, cfg), trainer::TrainingError);
}
