#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace bisdf::decoder {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Softplus keeps every unit smooth, which the analytic Jacobians rely on.
double softplus(double x);
double softplus_deriv(double x);

struct Layer {
  MatrixXd W;
  VectorXd b;
};

struct LayerGrads {
  MatrixXd dW;
  VectorXd db;
};

struct MlpCache {
  VectorXd input;
  std::vector<VectorXd> pre;   // pre-activation per layer
  std::vector<VectorXd> post;  // activation per layer
};

// Fully-connected net with softplus hidden activations. cross_index >= 1
// concatenates the original input onto that layer's input. The output layer
// is linear unless softplus_output is set.
struct Mlp {
  std::vector<Layer> layers;
  int cross_index = -1;
  bool softplus_output = false;

  VectorXd forward(const VectorXd& in, MlpCache* cache = nullptr) const;

  // Backpropagates dL/d(output); returns dL/d(input). When grads is non-null
  // the per-layer weight gradients are accumulated into it (shapes must
  // already match).
  VectorXd backward(const MlpCache& cache, const VectorXd& dout,
                    std::vector<LayerGrads>* grads = nullptr) const;

  std::vector<LayerGrads> zero_grads() const;
  std::size_t parameter_count() const;
};

Mlp make_mlp(const std::vector<int>& sizes, int cross_index,
             bool softplus_output, std::uint64_t seed);

}  // namespace bisdf::decoder
