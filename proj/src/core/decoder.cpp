#include "core/decoder.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "core/io.hpp"

namespace bisdf::decoder {

using nlohmann::json;

LatentCode LatentCode::Zero(int dim) {
  LatentCode c;
  c.mu = VectorXd::Zero(dim);
  c.sigma = VectorXd::Ones(dim);
  c.z = VectorXd::Zero(dim);
  c.delta_z = VectorXd::Zero(dim);
  return c;
}

DecoderWeights init_weights(int latent_dim, int hidden, int coarse_hidden,
                            std::uint64_t seed) {
  DecoderWeights w;
  w.latent_dim = latent_dim;
  w.hidden = hidden;
  w.coarse_hidden = coarse_hidden;
  w.fine = make_mlp({3 + latent_dim, hidden, hidden, hidden, 1},
                    /*cross_index=*/1, /*softplus_output=*/false, seed);
  w.coarse = make_mlp({latent_dim, coarse_hidden, 3}, /*cross_index=*/-1,
                      /*softplus_output=*/true, seed + 1);
  return w;
}

Vector3d coarse_decode(const DecoderWeights& w, const VectorXd& z) {
  if (z.size() != w.latent_dim)
    throw ShapeError("coarse_decode: latent dimension mismatch");
  return w.coarse.forward(z);
}

Eigen::Matrix<double, 3, Eigen::Dynamic> coarse_jacobian(
    const DecoderWeights& w, const VectorXd& z) {
  if (z.size() != w.latent_dim)
    throw ShapeError("coarse_jacobian: latent dimension mismatch");
  MlpCache cache;
  w.coarse.forward(z, &cache);
  Eigen::Matrix<double, 3, Eigen::Dynamic> J(3, w.latent_dim);
  for (int r = 0; r < 3; ++r) {
    VectorXd e = VectorXd::Zero(3);
    e(r) = 1.0;
    J.row(r) = w.coarse.backward(cache, e).transpose();
  }
  return J;
}

double fine_decode(const DecoderWeights& w, const Vector3d& x,
                   const VectorXd& z) {
  if (z.size() != w.latent_dim)
    throw ShapeError("fine_decode: latent dimension mismatch");
  VectorXd in(3 + w.latent_dim);
  in << x, z;
  return w.fine.forward(in)(0);
}

std::pair<Vector3d, VectorXd> fine_gradients(const DecoderWeights& w,
                                             const Vector3d& x,
                                             const VectorXd& z) {
  if (z.size() != w.latent_dim)
    throw ShapeError("fine_gradients: latent dimension mismatch");
  VectorXd in(3 + w.latent_dim);
  in << x, z;
  MlpCache cache;
  w.fine.forward(in, &cache);
  VectorXd din = w.fine.backward(cache, VectorXd::Ones(1));
  return {din.head<3>(), din.tail(w.latent_dim)};
}

double ellipsoid_sdf(const Vector3d& x, const Vector3d& u) {
  if (x.norm() < 1e-9) return -u.minCoeff();
  const Vector3d a = x.cwiseQuotient(u);
  const Vector3d b = a.cwiseQuotient(u);
  const double n1 = a.norm();
  const double n2 = b.norm();
  return n1 * (n1 - 1.0) / n2;
}

std::pair<Vector3d, Vector3d> ellipsoid_sdf_gradient(const Vector3d& x,
                                                     const Vector3d& u) {
  const Vector3d a = x.cwiseQuotient(u);
  const Vector3d b = a.cwiseQuotient(u);
  const double n1 = a.norm();
  const double n2 = b.norm();
  const double h = n1 * (n1 - 1.0) / n2;
  // dn1/dx_i = a_i/(u_i n1), dn2/dx_i = b_i/(u_i^2 n2)
  const Vector3d dn1_dx = a.cwiseQuotient(u) / n1;
  const Vector3d dn2_dx = b.cwiseQuotient(u).cwiseQuotient(u) / n2;
  // dn1/du_i = -a_i^2/(u_i n1), dn2/du_i = -2 b_i^2/(u_i n2)
  const Vector3d dn1_du = -a.cwiseProduct(a).cwiseQuotient(u) / n1;
  const Vector3d dn2_du = -2.0 * b.cwiseProduct(b).cwiseQuotient(u) / n2;
  const double c1 = (2.0 * n1 - 1.0) / n2;
  Vector3d dx = c1 * dn1_dx - (h / n2) * dn2_dx;
  Vector3d du = c1 * dn1_du - (h / n2) * dn2_du;
  return {dx, du};
}

VectorXd sample_code(const VectorXd& mu, const VectorXd& sigma,
                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  VectorXd z(mu.size());
  for (int i = 0; i < mu.size(); ++i) z(i) = mu(i) + sigma(i) * n(rng);
  return z;
}

namespace {

void write_floats(std::ostream& os, const MatrixXd& m) {
  for (int c = 0; c < m.cols(); ++c)
    for (int r = 0; r < m.rows(); ++r) {
      float f = static_cast<float>(m(r, c));
      os.write(reinterpret_cast<const char*>(&f), sizeof(float));
    }
}

void read_floats(std::istream& is, MatrixXd& m) {
  for (int c = 0; c < m.cols(); ++c)
    for (int r = 0; r < m.rows(); ++r) {
      float f;
      is.read(reinterpret_cast<char*>(&f), sizeof(float));
      m(r, c) = static_cast<double>(f);
    }
}

json mlp_header(const Mlp& m) {
  json layers = json::array();
  for (const auto& l : m.layers)
    layers.push_back({{"rows", l.W.rows()}, {"cols", l.W.cols()}});
  return {{"layers", layers},
          {"cross_index", m.cross_index},
          {"softplus_output", m.softplus_output}};
}

void read_mlp(std::istream& is, const json& header, Mlp& m) {
  m.cross_index = header.at("cross_index").get<int>();
  m.softplus_output = header.at("softplus_output").get<bool>();
  m.layers.clear();
  for (const auto& lj : header.at("layers")) {
    Layer l;
    l.W = MatrixXd::Zero(lj.at("rows").get<int>(), lj.at("cols").get<int>());
    l.b = VectorXd::Zero(l.W.rows());
    read_floats(is, l.W);
    MatrixXd b = l.b;
    read_floats(is, b);
    l.b = b;
    m.layers.push_back(std::move(l));
  }
}

}  // namespace

void save_weights(const DecoderWeights& w, const std::string& path,
                  const std::vector<LatentCode>* codes) {
  json header = {
      {"format", "bisdf-weights"},
      {"version", 1},
      {"activation", "softplus"},
      {"latent_dim", w.latent_dim},
      {"hidden", w.hidden},
      {"coarse_hidden", w.coarse_hidden},
      {"fine", mlp_header(w.fine)},
      {"coarse", mlp_header(w.coarse)},
      {"num_codes", codes ? codes->size() : 0},
  };
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << header.dump() << "\n";
  for (const auto& l : w.fine.layers) {
    write_floats(os, l.W);
    write_floats(os, l.b);
  }
  for (const auto& l : w.coarse.layers) {
    write_floats(os, l.W);
    write_floats(os, l.b);
  }
  if (codes) {
    for (const auto& c : *codes) {
      write_floats(os, c.mu);
      write_floats(os, c.sigma);
    }
  }
}

DecoderWeights load_weights(const std::string& path,
                            std::vector<LatentCode>* codes) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io::IoError("cannot open " + path);
  std::string line;
  std::getline(is, line);
  json header = json::parse(line);
  if (header.at("format") != "bisdf-weights" || header.at("version") != 1)
    throw std::runtime_error("unrecognized weights file format");
  DecoderWeights w;
  w.latent_dim = header.at("latent_dim").get<int>();
  w.hidden = header.at("hidden").get<int>();
  w.coarse_hidden = header.at("coarse_hidden").get<int>();
  read_mlp(is, header.at("fine"), w.fine);
  read_mlp(is, header.at("coarse"), w.coarse);
  const int num_codes = header.at("num_codes").get<int>();
  if (codes) {
    codes->clear();
    for (int i = 0; i < num_codes; ++i) {
      LatentCode c = LatentCode::Zero(w.latent_dim);
      MatrixXd mu = c.mu, sigma = c.sigma;
      read_floats(is, mu);
      read_floats(is, sigma);
      c.mu = mu;
      c.sigma = sigma;
      c.z = c.mu;
      codes->push_back(std::move(c));
    }
  }
  if (!is) throw std::runtime_error("truncated weights file: " + path);
  return w;
}

}  // namespace bisdf::decoder
