#include "core/mlp.hpp"

#include <cmath>
#include <random>

namespace bisdf::decoder {

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double softplus_deriv(double x) { return 1.0 / (1.0 + std::exp(-x)); }

VectorXd Mlp::forward(const VectorXd& in, MlpCache* cache) const {
  const int n = static_cast<int>(layers.size());
  if (cache) {
    cache->input = in;
    cache->pre.resize(n);
    cache->post.resize(n);
  }
  VectorXd h = in;
  for (int i = 0; i < n; ++i) {
    VectorXd layer_in = h;
    if (i == cross_index) {
      layer_in.resize(h.size() + in.size());
      layer_in << h, in;
    }
    VectorXd z = layers[i].W * layer_in + layers[i].b;
    const bool activate = (i + 1 < n) || softplus_output;
    VectorXd a = activate ? z.unaryExpr(&softplus).eval() : z;
    if (cache) {
      cache->pre[i] = z;
      cache->post[i] = a;
    }
    h = std::move(a);
  }
  return h;
}

VectorXd Mlp::backward(const MlpCache& cache, const VectorXd& dout,
                       std::vector<LayerGrads>* grads) const {
  const int n = static_cast<int>(layers.size());
  VectorXd d = dout;
  VectorXd din_extra = VectorXd::Zero(cache.input.size());
  for (int i = n - 1; i >= 0; --i) {
    const bool activate = (i + 1 < n) || softplus_output;
    if (activate)
      d = d.cwiseProduct(cache.pre[i].unaryExpr(&softplus_deriv));
    VectorXd layer_in;
    VectorXd prev = (i == 0) ? cache.input : cache.post[i - 1];
    if (i == cross_index) {
      layer_in.resize(prev.size() + cache.input.size());
      layer_in << prev, cache.input;
    } else {
      layer_in = prev;
    }
    if (grads) {
      (*grads)[i].dW.noalias() += d * layer_in.transpose();
      (*grads)[i].db += d;
    }
    VectorXd dlayer_in = layers[i].W.transpose() * d;
    if (i == cross_index) {
      din_extra += dlayer_in.tail(cache.input.size());
      d = dlayer_in.head(prev.size());
    } else {
      d = std::move(dlayer_in);
    }
  }
  return d + din_extra;
}

std::vector<LayerGrads> Mlp::zero_grads() const {
  std::vector<LayerGrads> g(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    g[i].dW = MatrixXd::Zero(layers[i].W.rows(), layers[i].W.cols());
    g[i].db = VectorXd::Zero(layers[i].b.size());
  }
  return g;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.W.size() + l.b.size();
  return n;
}

Mlp make_mlp(const std::vector<int>& sizes, int cross_index,
             bool softplus_output, std::uint64_t seed) {
  Mlp mlp;
  mlp.cross_index = cross_index;
  mlp.softplus_output = softplus_output;
  std::mt19937_64 rng(seed);
  const int in_dim = sizes.front();
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    int fan_in = sizes[i - 1];
    if (static_cast<int>(i - 1) == cross_index) fan_in += in_dim;
    const double bound = std::sqrt(6.0 / (fan_in + sizes[i]));
    std::uniform_real_distribution<double> u(-bound, bound);
    Layer l;
    l.W = MatrixXd::Zero(sizes[i], fan_in);
    for (int r = 0; r < l.W.rows(); ++r)
      for (int c = 0; c < l.W.cols(); ++c) l.W(r, c) = u(rng);
    l.b = VectorXd::Zero(sizes[i]);
    mlp.layers.push_back(std::move(l));
  }
  return mlp;
}

}  // namespace bisdf::decoder
