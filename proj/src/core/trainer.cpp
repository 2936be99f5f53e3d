#include "core/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

namespace bisdf::trainer {

namespace {

using decoder::LayerGrads;
using decoder::Mlp;
using decoder::MlpCache;

long mlp_size(const Mlp& m) { return static_cast<long>(m.parameter_count()); }

VectorXd flatten(const Mlp& m) {
  VectorXd v(mlp_size(m));
  long k = 0;
  for (const auto& l : m.layers) {
    v.segment(k, l.W.size()) = Eigen::Map<const VectorXd>(l.W.data(), l.W.size());
    k += l.W.size();
    v.segment(k, l.b.size()) = l.b;
    k += l.b.size();
  }
  return v;
}

void unflatten(const VectorXd& v, Mlp& m) {
  long k = 0;
  for (auto& l : m.layers) {
    Eigen::Map<VectorXd>(l.W.data(), l.W.size()) = v.segment(k, l.W.size());
    k += l.W.size();
    l.b = v.segment(k, l.b.size());
    k += l.b.size();
  }
}

VectorXd flatten_grads(const Mlp& m, const std::vector<LayerGrads>& g) {
  VectorXd v(mlp_size(m));
  long k = 0;
  for (const auto& lg : g) {
    v.segment(k, lg.dW.size()) =
        Eigen::Map<const VectorXd>(lg.dW.data(), lg.dW.size());
    k += lg.dW.size();
    v.segment(k, lg.db.size()) = lg.db;
    k += lg.db.size();
  }
  return v;
}

struct HuberOut {
  double value;
  double deriv;
};

HuberOut huber(double r, double delta) {
  if (std::abs(r) <= delta) return {0.5 * r * r, r};
  return {delta * (std::abs(r) - 0.5 * delta), std::copysign(delta, r)};
}

Vector3d uniform_ball(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    Vector3d p(u(rng), u(rng), u(rng));
    if (p.squaredNorm() <= 1.0) return p;
  }
}

}  // namespace

double kl_divergence(const VectorXd& mu, const VectorXd& sigma) {
  double kl = 0.0;
  for (long i = 0; i < mu.size(); ++i) {
    const double s2 = sigma(i) * sigma(i);
    kl += 0.5 * (s2 + mu(i) * mu(i) - 1.0 - std::log(s2));
  }
  return kl;
}

void adam_step(VectorXd& params, const VectorXd& grads, AdamState& state,
               double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (state.m.size() != params.size()) {
    state.m = VectorXd::Zero(params.size());
    state.v = VectorXd::Zero(params.size());
    state.t = 0;
  }
  state.t += 1;
  state.m = b1 * state.m + (1.0 - b1) * grads;
  state.v = b2 * state.v + (1.0 - b2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  params -= (lr / c1) * state.m.cwiseQuotient(
                            ((state.v / c2).cwiseSqrt().array() + eps).matrix());
}

std::vector<TrainingInstance> generate_corpus(int n_instances,
                                              const FamilyParams& family,
                                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ua(family.axis_min, family.axis_max);
  std::uniform_real_distribution<double> ue(family.exp_min, family.exp_max);
  std::uniform_real_distribution<double> ueta(-M_PI_2, M_PI_2);
  std::uniform_real_distribution<double> uomega(-M_PI, M_PI);
  constexpr double kOffsets[] = {0.0, 0.005, -0.005, 0.02, -0.02, 0.05, -0.05};
  constexpr int kCoarse = 4096, kFine = 8192;

  std::vector<TrainingInstance> out;
  out.reserve(n_instances);
  for (int id = 0; id < n_instances; ++id) {
    TrainingInstance inst;
    inst.id = id;
    do {
      inst.shape.a = Vector3d(ua(rng), ua(rng), ua(rng));
      inst.shape.e1 = ue(rng);
      inst.shape.e2 = ue(rng);
    } while (inst.shape.a.minCoeff() < 0.05);

    inst.coarse_points.reserve(kCoarse);
    inst.coarse_labels.reserve(kCoarse);
    for (int i = 0; i < kCoarse; ++i) {
      const Vector3d p = uniform_ball(rng);
      inst.coarse_points.push_back(p);
      inst.coarse_labels.push_back(inst.shape.sdf(p));
    }

    inst.fine_points.reserve(kFine);
    inst.fine_labels.reserve(kFine);
    while (static_cast<int>(inst.fine_points.size()) < kFine) {
      const Vector3d s = inst.shape.surface_point(ueta(rng), uomega(rng));
      const Vector3d n = inst.shape.normal(s);
      for (double off : kOffsets) {
        if (static_cast<int>(inst.fine_points.size()) == kFine) break;
        const Vector3d p = s + off * n;
        inst.fine_points.push_back(p);
        inst.fine_labels.push_back(off == 0.0 ? 0.0 : inst.shape.sdf(p));
      }
    }
    out.push_back(std::move(inst));
  }
  return out;
}

TrainResult train(const std::vector<TrainingInstance>& corpus,
                  const TrainConfig& cfg) {
  if (corpus.empty()) throw TrainingError("empty corpus");
  const int d = cfg.latent_dim;
  const int n = static_cast<int>(corpus.size());

  TrainResult res;
  res.weights = decoder::init_weights(d, cfg.hidden, cfg.coarse_hidden, cfg.seed);

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Codes are optimized as (mu, log sigma) so sigma stays positive.
  std::vector<VectorXd> mu(n), log_sigma(n);
  std::vector<AdamState> code_state(n);
  for (int i = 0; i < n; ++i) {
    mu[i] = VectorXd::Zero(d);
    for (int j = 0; j < d; ++j) mu[i](j) = 0.01 * gauss(rng);
    log_sigma[i] = VectorXd::Constant(d, std::log(cfg.sigma_init));
  }

  VectorXd fine_params = flatten(res.weights.fine);
  VectorXd coarse_params = flatten(res.weights.coarse);
  AdamState fine_state, coarse_state;

  std::uniform_int_distribution<int> pick_fine(
      0, static_cast<int>(corpus[0].fine_points.size()) - 1);
  std::uniform_int_distribution<int> pick_coarse(
      0, static_cast<int>(corpus[0].coarse_points.size()) - 1);

  res.trace.reserve(cfg.epochs);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr_coarse =
        cfg.learning_rate * std::pow(cfg.decay, epoch / cfg.coarse_decay_every);
    const double lr_fine =
        cfg.learning_rate * std::pow(cfg.decay, epoch / cfg.fine_decay_every);

    LossRecord rec{epoch, 0, 0, 0};
    for (int step = 0; step < cfg.steps_per_epoch; ++step)
    for (int i = 0; i < n; ++i) {
      const auto& inst = corpus[i];
      VectorXd sigma = log_sigma[i].array().exp().matrix();
      VectorXd eps(d);
      for (int j = 0; j < d; ++j) eps(j) = gauss(rng);
      const VectorXd z = mu[i] + sigma.cwiseProduct(eps);

      auto fine_grads = res.weights.fine.zero_grads();
      auto coarse_grads = res.weights.coarse.zero_grads();
      VectorXd dz = VectorXd::Zero(d);
      double loss_fine = 0.0, loss_coarse = 0.0;

      VectorXd fin(3 + d);
      fin.tail(d) = z;
      const double wf = cfg.beta / cfg.fine_batch;
      for (int b = 0; b < cfg.fine_batch; ++b) {
        const int k = pick_fine(rng);
        fin.head<3>() = inst.fine_points[k];
        MlpCache cache;
        const double f = res.weights.fine.forward(fin, &cache)(0);
        const auto [val, der] = huber(f - inst.fine_labels[k], cfg.huber_delta);
        loss_fine += val / cfg.fine_batch;
        const VectorXd din = res.weights.fine.backward(
            cache, VectorXd::Constant(1, wf * der), &fine_grads);
        dz += din.tail(d);
      }

      MlpCache ccache;
      const Vector3d u = res.weights.coarse.forward(z, &ccache);
      Vector3d du = Vector3d::Zero();
      const double wc = cfg.gamma / cfg.coarse_batch;
      for (int b = 0; b < cfg.coarse_batch; ++b) {
        const int k = pick_coarse(rng);
        const double h = decoder::ellipsoid_sdf(inst.coarse_points[k], u);
        const auto [val, der] =
            huber(h - inst.coarse_labels[k], cfg.huber_delta);
        loss_coarse += val / cfg.coarse_batch;
        du += wc * der *
              decoder::ellipsoid_sdf_gradient(inst.coarse_points[k], u).second;
      }
      dz += res.weights.coarse.backward(ccache, du, &coarse_grads);

      const double loss_kl = kl_divergence(mu[i], sigma);
      if (!std::isfinite(loss_fine) || !std::isfinite(loss_coarse) ||
          !std::isfinite(loss_kl)) {
        throw TrainingError(fmt::format(
            "non-finite loss at epoch {} instance {} (fine={} coarse={} kl={})",
            epoch, i, loss_fine, loss_coarse, loss_kl));
      }
      rec.fine += cfg.beta * loss_fine / n;
      rec.coarse += cfg.gamma * loss_coarse / n;
      rec.kl += cfg.alpha * loss_kl / n;

      VectorXd dmu = dz + cfg.alpha * mu[i];
      VectorXd dsigma = dz.cwiseProduct(eps) +
                        cfg.alpha * (sigma - sigma.cwiseInverse());
      VectorXd code(2 * d), code_grad(2 * d);
      code << mu[i], log_sigma[i];
      code_grad << dmu, dsigma.cwiseProduct(sigma);
      adam_step(code, code_grad, code_state[i], lr_fine);
      mu[i] = code.head(d);
      log_sigma[i] = code.tail(d);

      adam_step(fine_params, flatten_grads(res.weights.fine, fine_grads),
                fine_state, lr_fine);
      unflatten(fine_params, res.weights.fine);
      adam_step(coarse_params, flatten_grads(res.weights.coarse, coarse_grads),
                coarse_state, lr_coarse);
      unflatten(coarse_params, res.weights.coarse);
    }
    rec.fine /= cfg.steps_per_epoch;
    rec.coarse /= cfg.steps_per_epoch;
    rec.kl /= cfg.steps_per_epoch;
    res.trace.push_back(rec);
  }

  res.codes.resize(n);
  res.class_code = VectorXd::Zero(d);
  for (int i = 0; i < n; ++i) {
    res.codes[i].mu = mu[i];
    res.codes[i].sigma = log_sigma[i].array().exp().matrix();
    res.codes[i].z = mu[i];
    res.codes[i].delta_z = VectorXd::Zero(d);
    res.class_code += mu[i] / n;
  }
  return res;
}

double surface_residual(const DecoderWeights& w, const VectorXd& code,
                        const shape::Superellipsoid& shape, int n_samples,
                        std::uint64_t seed, bool median) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ueta(-M_PI_2, M_PI_2);
  std::uniform_real_distribution<double> uomega(-M_PI, M_PI);
  std::vector<double> r(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    const Vector3d p = shape.surface_point(ueta(rng), uomega(rng));
    r[i] = std::abs(decoder::fine_decode(w, p, code));
  }
  if (!median) {
    double s = 0;
    for (double v : r) s += v;
    return s / n_samples;
  }
  std::nth_element(r.begin(), r.begin() + n_samples / 2, r.end());
  return r[n_samples / 2];
}

}  // namespace bisdf::trainer
