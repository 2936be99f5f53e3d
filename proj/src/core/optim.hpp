#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "core/decoder.hpp"
#include "core/lie.hpp"
#include "core/scene.hpp"

namespace bisdf::optim {

using decoder::DecoderWeights;
using decoder::VectorXd;
using Eigen::Vector3d;
using lie::Sim3Transform;
using lie::Vec7;
using scene::LabeledPoint;

struct OptimConfig {
  double beta = 1.0;    // fine term weight
  double gamma = 0.5;   // coarse term weight
  double reg = 1e-2;    // weight of |delta_z|^2
  double huber_delta = 0.05;
  double eta_pose = 1e-3;
  double eta_code = 1e-2;
  int max_iters = 200;
  double tol = 1e-6;
  int max_points = 10000;  // minibatch cap, subsampled once up front
  std::uint64_t seed = 0;
  // Class priors used to resolve the scale/shape gauge: canonical semi-axis
  // range of the shape family and the expected object-to-world scale range.
  double axis_min = 0.15;
  double axis_max = 0.5;
  double scale_min = 0.8;
  double scale_max = 1.25;
};

struct ErrorBreakdown {
  double total = 0;
  double fine = 0;
  double coarse = 0;
  double reg = 0;
};

struct Convergence {
  int iterations = 0;
  double initial_error = 0;
  double final_error = 0;
  bool converged = false;
};

// World->object estimate with a test-time code deformation.
struct ObjectEstimate {
  Sim3Transform world_to_object;
  VectorXd delta_z;
  Convergence convergence;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double huber(double r, double delta);
double huber_deriv(double r, double delta);

// Residual of one labeled world point against the fine (SDF net) or coarse
// (decoded ellipsoid) model. T maps world to object; the residual is scaled
// by 1/scale(T) so it measures world-frame metric distance.
double fine_residual(const DecoderWeights& w, const VectorXd& z,
                     const LabeledPoint& pt, const Sim3Transform& T,
                     const VectorXd& delta_z);
double coarse_residual(const DecoderWeights& w, const VectorXd& z,
                       const LabeledPoint& pt, const Sim3Transform& T,
                       const VectorXd& delta_z);

ErrorBreakdown total_error(const DecoderWeights& w, const VectorXd& z,
                           const std::vector<LabeledPoint>& pts,
                           const Sim3Transform& T, const VectorXd& delta_z,
                           const OptimConfig& cfg);

// Gradient of the total error in the left tangent of T (rho, theta, sigma
// ordering) and in delta_z.
void error_gradients(const DecoderWeights& w, const VectorXd& z,
                     const std::vector<LabeledPoint>& pts,
                     const Sim3Transform& T, const VectorXd& delta_z,
                     const OptimConfig& cfg, Vec7* grad_xi, VectorXd* grad_dz);

// Alternating gradient descent with backtracking halving on both steps.
ObjectEstimate optimize(const DecoderWeights& w, const VectorXd& z,
                        const std::vector<LabeledPoint>& points,
                        const Sim3Transform& initial_world_to_object,
                        const OptimConfig& cfg);

}  // namespace bisdf::optim
