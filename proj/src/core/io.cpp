#include "core/io.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

namespace bisdf::io {

namespace {

std::ofstream open_out(const std::string& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot read " + path);
  return in;
}

void write_doubles(std::ofstream& out, const double* p, std::size_t n) {
  out.write(reinterpret_cast<const char*>(p),
            static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::ifstream& in, double* p, std::size_t n) {
  in.read(reinterpret_cast<char*>(p),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw IoError("truncated corpus file");
}

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (long i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vec_from_json(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v(i) = a[i].get<double>();
  return v;
}

}  // namespace

void write_pfm(const scene::DepthMap& depth, const std::string& path) {
  auto out = open_out(path, true);
  out << "Pf\n" << depth.cols() << " " << depth.rows() << "\n-1.0\n";
  for (long r = depth.rows() - 1; r >= 0; --r)
    out.write(reinterpret_cast<const char*>(depth.data() + r * depth.cols()),
              depth.cols() * static_cast<long>(sizeof(float)));
}

scene::DepthMap read_pfm(const std::string& path) {
  auto in = open_in(path, true);
  std::string magic;
  int w, h;
  double scale;
  in >> magic >> w >> h >> scale;
  if (magic != "Pf" || w <= 0 || h <= 0) throw IoError("bad pfm " + path);
  if (scale >= 0) throw IoError("big-endian pfm unsupported: " + path);
  in.get();  // single whitespace after the header
  scene::DepthMap depth(h, w);
  for (int r = h - 1; r >= 0; --r)
    in.read(reinterpret_cast<char*>(depth.data() + r * w),
            w * static_cast<long>(sizeof(float)));
  if (!in) throw IoError("truncated pfm " + path);
  return depth;
}

void write_pgm(const scene::Mask& mask, const std::string& path) {
  auto out = open_out(path, true);
  out << "P5\n" << mask.cols() << " " << mask.rows() << "\n255\n";
  out.write(reinterpret_cast<const char*>(mask.data()), mask.size());
}

scene::Mask read_pgm(const std::string& path) {
  auto in = open_in(path, true);
  std::string magic;
  int w, h, maxval;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255)
    throw IoError("bad pgm " + path);
  in.get();
  scene::Mask mask(h, w);
  in.read(reinterpret_cast<char*>(mask.data()), mask.size());
  if (!in) throw IoError("truncated pgm " + path);
  return mask;
}

json sim3_to_json(const lie::Sim3Transform& T) {
  json a = json::array();
  const auto& m = T.matrix();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) a.push_back(m(r, c));
  return a;
}

lie::Sim3Transform sim3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 16)
    throw IoError("similarity must be a 16-element array");
  lie::Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = j[4 * r + c].get<double>();
  return lie::Sim3Transform(m);
}

json quadric_to_json(const quadric::DualQuadric& q) {
  return vec_to_json(q.vech());
}

quadric::DualQuadric quadric_from_json(const json& j) {
  if (!j.is_array() || j.size() != 10)
    throw IoError("dual quadric must be a 10-element array");
  quadric::Vec10 v;
  for (int i = 0; i < 10; ++i) v(i) = j[i].get<double>();
  return quadric::DualQuadric::FromVech(v);
}

json scene_to_json(const scene::SceneSpec& spec) {
  json j;
  j["seed"] = spec.seed;
  j["intrinsics"] = {{"fx", spec.intrinsics.fx}, {"fy", spec.intrinsics.fy},
                     {"cx", spec.intrinsics.cx}, {"cy", spec.intrinsics.cy},
                     {"width", spec.intrinsics.width},
                     {"height", spec.intrinsics.height}};
  j["noise"] = {{"depth_sigma", spec.noise.depth_sigma},
                {"mask_erode", spec.noise.mask_erode},
                {"mask_dilate", spec.noise.mask_dilate}};
  j["objects"] = json::array();
  for (const auto& o : spec.objects) {
    j["objects"].push_back(
        {{"class_id", o.class_id},
         {"a", {o.shape.a.x(), o.shape.a.y(), o.shape.a.z()}},
         {"e1", o.shape.e1},
         {"e2", o.shape.e2},
         {"world_to_object", sim3_to_json(o.world_to_object)}});
  }
  j["cameras"] = json::array();
  for (const auto& C : spec.cameras) {
    json a = json::array();
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) a.push_back(C(r, c));
    j["cameras"].push_back(a);
  }
  return j;
}

scene::SceneSpec scene_from_json(const json& j) {
  scene::SceneSpec spec;
  spec.seed = j.value("seed", 0ull);
  if (j.contains("intrinsics")) {
    const auto& ji = j["intrinsics"];
    spec.intrinsics.fx = ji.at("fx");
    spec.intrinsics.fy = ji.at("fy");
    spec.intrinsics.cx = ji.at("cx");
    spec.intrinsics.cy = ji.at("cy");
    spec.intrinsics.width = ji.at("width");
    spec.intrinsics.height = ji.at("height");
  }
  if (j.contains("noise")) {
    const auto& jn = j["noise"];
    spec.noise.depth_sigma = jn.value("depth_sigma", 0.0);
    spec.noise.mask_erode = jn.value("mask_erode", 0);
    spec.noise.mask_dilate = jn.value("mask_dilate", 0);
  }
  for (const auto& jo : j.at("objects")) {
    scene::SceneObject o;
    o.class_id = jo.at("class_id");
    o.shape.a = Eigen::Vector3d(jo.at("a")[0], jo.at("a")[1], jo.at("a")[2]);
    o.shape.e1 = jo.at("e1");
    o.shape.e2 = jo.at("e2");
    o.world_to_object = sim3_from_json(jo.at("world_to_object"));
    spec.objects.push_back(std::move(o));
  }
  for (const auto& jc : j.at("cameras")) {
    Eigen::Matrix4d C;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) C(r, c) = jc[4 * r + c].get<double>();
    spec.cameras.push_back(C);
  }
  return spec;
}

void save_scene(const scene::SceneSpec& spec, const std::string& path) {
  auto out = open_out(path, false);
  out << scene_to_json(spec).dump(2) << "\n";
}

scene::SceneSpec load_scene(const std::string& path) {
  auto in = open_in(path, false);
  json j;
  in >> j;
  return scene_from_json(j);
}

void save_observations(const std::vector<scene::LabeledPoint>& pts,
                       const std::string& path) {
  auto out = open_out(path, false);
  for (const auto& p : pts) {
    json j = {{"x", {p.x.x(), p.x.y(), p.x.z()}},
              {"d", p.d},
              {"k", p.view},
              {"p", {p.pixel.x(), p.pixel.y()}}};
    out << j.dump() << "\n";
  }
}

std::vector<scene::LabeledPoint> load_observations(const std::string& path) {
  auto in = open_in(path, false);
  std::vector<scene::LabeledPoint> pts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    scene::LabeledPoint p;
    p.x = Eigen::Vector3d(j.at("x")[0], j.at("x")[1], j.at("x")[2]);
    p.d = j.at("d");
    p.view = j.at("k");
    p.pixel = Eigen::Vector2i(j.at("p")[0], j.at("p")[1]);
    pts.push_back(p);
  }
  return pts;
}

void save_estimates(const std::vector<optim::ObjectEstimate>& estimates,
                    const std::string& path) {
  json j;
  j["objects"] = json::array();
  for (const auto& e : estimates) {
    j["objects"].push_back(
        {{"world_to_object", sim3_to_json(e.world_to_object)},
         {"delta_z", vec_to_json(e.delta_z)},
         {"iterations", e.convergence.iterations},
         {"initial_error", e.convergence.initial_error},
         {"final_error", e.convergence.final_error},
         {"converged", e.convergence.converged}});
  }
  auto out = open_out(path, false);
  out << j.dump(2) << "\n";
}

std::vector<optim::ObjectEstimate> load_estimates(const std::string& path) {
  auto in = open_in(path, false);
  json j;
  in >> j;
  std::vector<optim::ObjectEstimate> out;
  for (const auto& je : j.at("objects")) {
    optim::ObjectEstimate e;
    e.world_to_object = sim3_from_json(je.at("world_to_object"));
    e.delta_z = vec_from_json(je.at("delta_z"));
    e.convergence.iterations = je.value("iterations", 0);
    e.convergence.initial_error = je.value("initial_error", 0.0);
    e.convergence.final_error = je.value("final_error", 0.0);
    e.convergence.converged = je.value("converged", false);
    out.push_back(std::move(e));
  }
  return out;
}

void save_corpus(const std::vector<trainer::TrainingInstance>& corpus,
                 const std::string& path) {
  auto out = open_out(path, true);
  json header = {{"format", "bisdf-corpus"},
                 {"version", 1},
                 {"instances", corpus.size()}};
  if (!corpus.empty()) {
    header["coarse_samples"] = corpus[0].coarse_points.size();
    header["fine_samples"] = corpus[0].fine_points.size();
  }
  out << header.dump() << "\n";
  for (const auto& inst : corpus) {
    double shape[5] = {inst.shape.a.x(), inst.shape.a.y(), inst.shape.a.z(),
                       inst.shape.e1, inst.shape.e2};
    write_doubles(out, shape, 5);
    for (std::size_t i = 0; i < inst.coarse_points.size(); ++i) {
      write_doubles(out, inst.coarse_points[i].data(), 3);
      write_doubles(out, &inst.coarse_labels[i], 1);
    }
    for (std::size_t i = 0; i < inst.fine_points.size(); ++i) {
      write_doubles(out, inst.fine_points[i].data(), 3);
      write_doubles(out, &inst.fine_labels[i], 1);
    }
  }
}

std::vector<trainer::TrainingInstance> load_corpus(const std::string& path) {
  auto in = open_in(path, true);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty corpus file " + path);
  const json header = json::parse(line);
  if (header.value("format", "") != "bisdf-corpus")
    throw IoError("not a corpus file: " + path);
  const std::size_t n = header.at("instances");
  const std::size_t nc = header.value("coarse_samples", 4096);
  const std::size_t nf = header.value("fine_samples", 8192);

  std::vector<trainer::TrainingInstance> corpus(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto& inst = corpus[k];
    inst.id = static_cast<int>(k);
    double shape[5];
    read_doubles(in, shape, 5);
    inst.shape.a = Eigen::Vector3d(shape[0], shape[1], shape[2]);
    inst.shape.e1 = shape[3];
    inst.shape.e2 = shape[4];
    inst.coarse_points.resize(nc);
    inst.coarse_labels.resize(nc);
    for (std::size_t i = 0; i < nc; ++i) {
      read_doubles(in, inst.coarse_points[i].data(), 3);
      read_doubles(in, &inst.coarse_labels[i], 1);
    }
    inst.fine_points.resize(nf);
    inst.fine_labels.resize(nf);
    for (std::size_t i = 0; i < nf; ++i) {
      read_doubles(in, inst.fine_points[i].data(), 3);
      read_doubles(in, &inst.fine_labels[i], 1);
    }
  }
  return corpus;
}

}  // namespace bisdf::io
