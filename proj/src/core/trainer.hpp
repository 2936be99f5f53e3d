#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "core/decoder.hpp"
#include "core/superellipsoid.hpp"

namespace bisdf::trainer {

using decoder::DecoderWeights;
using decoder::LatentCode;
using decoder::VectorXd;
using Eigen::Vector3d;

struct TrainingInstance {
  int id = 0;
  shape::Superellipsoid shape;
  // Uniform-ball samples with exact SDF labels (coarse decoder).
  std::vector<Vector3d> coarse_points;
  std::vector<double> coarse_labels;
  // Near-surface samples, |label| <= 0.05 (fine decoder).
  std::vector<Vector3d> fine_points;
  std::vector<double> fine_labels;
};

struct FamilyParams {
  double axis_min = 0.15;
  double axis_max = 0.5;
  double exp_min = 0.8;
  double exp_max = 1.6;
};

struct TrainConfig {
  int epochs = 500;
  double learning_rate = 5e-4;
  double decay = 0.5;
  int coarse_decay_every = 150;
  int fine_decay_every = 350;
  int steps_per_epoch = 1;  // minibatches per instance per epoch
  int fine_batch = 256;
  int coarse_batch = 128;
  int latent_dim = 16;
  int hidden = 64;
  int coarse_hidden = 32;
  double alpha = 1e-3;  // KL weight
  double beta = 1.0;    // fine weight
  double gamma = 0.5;   // coarse weight
  double huber_delta = 0.05;
  double sigma_init = 0.1;
  std::uint64_t seed = 0;
};

struct LossRecord {
  int epoch = 0;
  double coarse = 0;
  double fine = 0;
  double kl = 0;
};

struct TrainResult {
  DecoderWeights weights;
  std::vector<LatentCode> codes;  // one per instance
  VectorXd class_code;            // mean of instance mu's
  std::vector<LossRecord> trace;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Deterministic per seed. Instances with any semi-axis < 0.05 are resampled.
// Per instance: 4096 ball samples, 8192 near-surface samples built as
// surface points offset by {0, +-0.005, +-0.02, +-0.05} along the normal.
std::vector<TrainingInstance> generate_corpus(int n_instances,
                                              const FamilyParams& family,
                                              std::uint64_t seed);

TrainResult train(const std::vector<TrainingInstance>& corpus,
                  const TrainConfig& config);

// Adam with bias correction; beta1=0.9, beta2=0.999, eps=1e-8.
struct AdamState {
  VectorXd m;
  VectorXd v;
  long t = 0;
};
void adam_step(VectorXd& params, const VectorXd& grads, AdamState& state,
               double lr);

// KL(N(mu, diag(sigma)^2) || N(0, I)).
double kl_divergence(const VectorXd& mu, const VectorXd& sigma);

// Mean |f(x; code)| over fresh surface samples of the instance shape.
double surface_residual(const DecoderWeights& w, const VectorXd& code,
                        const shape::Superellipsoid& shape, int n_samples,
                        std::uint64_t seed, bool median = false);

}  // namespace bisdf::trainer
