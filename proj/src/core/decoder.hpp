#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "core/mlp.hpp"

namespace bisdf::decoder {

using Eigen::Vector3d;

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Gaussian latent code. z defaults to mu; delta_z is the test-time
// deformation and stays zero during training of the class model.
struct LatentCode {
  VectorXd mu;
  VectorXd sigma;
  VectorXd z;
  VectorXd delta_z;

  static LatentCode Zero(int dim);
};

// Bi-level class shape model: fine SDF net f (input (x, z), scalar out) and
// coarse semi-axis net g (input z, softplus 3-vector out).
struct DecoderWeights {
  int latent_dim = 16;
  int hidden = 64;
  int coarse_hidden = 32;
  Mlp fine;    // (3+d) -> h -> h (cross) -> h -> 1
  Mlp coarse;  // d -> ch -> 3 (softplus output)
};

DecoderWeights init_weights(int latent_dim, int hidden, int coarse_hidden,
                            std::uint64_t seed);

Vector3d coarse_decode(const DecoderWeights& w, const VectorXd& z);
// 3 x d Jacobian of coarse_decode in z.
Eigen::Matrix<double, 3, Eigen::Dynamic> coarse_jacobian(
    const DecoderWeights& w, const VectorXd& z);

double fine_decode(const DecoderWeights& w, const Vector3d& x,
                   const VectorXd& z);
// (grad_x, grad_z) of the fine SDF.
std::pair<Vector3d, VectorXd> fine_gradients(const DecoderWeights& w,
                                             const Vector3d& x,
                                             const VectorXd& z);

// Approximate ellipsoid SDF h(x, u) = |U^-1 x| (|U^-1 x| - 1) / |U^-2 x|.
// Returns -min(u) at the (0/0) center.
double ellipsoid_sdf(const Vector3d& x, const Vector3d& u);
std::pair<Vector3d, Vector3d> ellipsoid_sdf_gradient(const Vector3d& x,
                                                     const Vector3d& u);

// Reparametrization draw z = mu + sigma .* eps, eps ~ N(0, I) from a seeded
// generator.
VectorXd sample_code(const VectorXd& mu, const VectorXd& sigma,
                     std::uint64_t seed);

// Weights file: one line of JSON (dims, layer shapes, activation tag,
// format version) followed by the little-endian float32 parameter arrays in
// declared order.
void save_weights(const DecoderWeights& w, const std::string& path,
                  const std::vector<LatentCode>* codes = nullptr);
DecoderWeights load_weights(const std::string& path,
                            std::vector<LatentCode>* codes = nullptr);

}  // namespace bisdf::decoder
