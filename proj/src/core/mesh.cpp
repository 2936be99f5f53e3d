#include "core/mesh.hpp"

#include <array>
#include <cmath>

#include <Eigen/Geometry>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

namespace bisdf::mesh {

namespace {

// Global key of the grid edge starting at (i,j,k) along axis.
struct EdgeKey {
  int i, j, k, axis;
  bool operator<(const EdgeKey& o) const {
    return std::tie(i, j, k, axis) < std::tie(o.i, o.j, o.k, o.axis);
  }
};

// Corner b of a cell has offsets (b&1, b>>1&1, b>>2&1).
Vector3i corner_offset(int b) { return {b & 1, (b >> 1) & 1, (b >> 2) & 1}; }

}  // namespace

SdfGrid sample_sdf_grid(const std::function<double(const Vector3d&)>& f,
                        int n, double half_extent) {
  if (n < 2) throw std::invalid_argument("grid needs at least 2 samples");
  if (half_extent <= 0) throw std::invalid_argument("half_extent must be > 0");
  SdfGrid g;
  g.n = n;
  g.origin = Vector3d::Constant(-half_extent);
  g.spacing = 2 * half_extent / (n - 1);
  g.values.resize(static_cast<std::size_t>(n) * n * n);
  std::size_t idx = 0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) g.values[idx++] = f(g.position(i, j, k));
  return g;
}

TriMesh marching_cubes(const SdfGrid& grid, double iso) {
  TriMesh mesh;
  std::map<EdgeKey, int> vertex_of_edge;

  auto edge_vertex = [&](const EdgeKey& e, double va, double vb) {
    auto it = vertex_of_edge.find(e);
    if (it != vertex_of_edge.end()) return it->second;
    const double t = (iso - va) / (vb - va);
    Vector3d p = grid.position(e.i, e.j, e.k);
    p(e.axis) += t * grid.spacing;
    mesh.vertices.push_back(p);
    const int id = static_cast<int>(mesh.vertices.size()) - 1;
    vertex_of_edge.emplace(e, id);
    return id;
  };

  const int n = grid.n;
  std::array<double, 8> v;
  for (int k = 0; k + 1 < n; ++k) {
    for (int j = 0; j + 1 < n; ++j) {
      for (int i = 0; i + 1 < n; ++i) {
        int inside_mask = 0;
        for (int b = 0; b < 8; ++b) {
          const Vector3i o = corner_offset(b);
          v[b] = grid.at(i + o.x(), j + o.y(), k + o.z());
          if (v[b] < iso) inside_mask |= 1 << b;
        }
        if (inside_mask == 0 || inside_mask == 0xff) continue;

        // Cell-local crossed edge -> mesh vertex, keyed by corner pair.
        auto local_edge = [&](int a, int b) {
          if (v[a] < iso == v[b] < iso) return -1;
          const int d = a ^ b;  // single bit
          const int axis = d == 1 ? 0 : d == 2 ? 1 : 2;
          const int lo = (a & d) ? b : a;
          const Vector3i o = corner_offset(lo);
          return edge_vertex({i + o.x(), j + o.y(), k + o.z(), axis},
                             v[lo], v[lo | d]);
        };

        // Segments on the 6 faces; each crossed edge gets exactly two
        // neighbors, one from each adjacent face, forming closed loops.
        std::map<int, std::array<int, 2>> next;
        auto add_segment = [&](int va_, int vb_) {
          auto& na = next[va_];
          (na[0] < 0 ? na[0] : na[1]) = vb_;
          auto& nb = next[vb_];
          (nb[0] < 0 ? nb[0] : nb[1]) = va_;
        };
        for (int f = 0; f < 3; ++f) {
          const int u = (f + 1) % 3, w = (f + 2) % 3;
          for (int s = 0; s < 2; ++s) {
            // Face corners in cyclic order.
            const int c0 = s << f;
            const int c1 = c0 | (1 << u);
            const int c2 = c1 | (1 << w);
            const int c3 = c0 | (1 << w);
            const int corners[4] = {c0, c1, c2, c3};
            int cross[4], ncross = 0;
            int ids[4];
            for (int e = 0; e < 4; ++e) {
              const int id = local_edge(corners[e], corners[(e + 1) % 4]);
              ids[e] = id;
              if (id >= 0) cross[ncross++] = e;
            }
            if (ncross == 0) continue;
            for (int e = 0; e < 4; ++e)
              if (ids[e] >= 0 && !next.count(ids[e]))
                next[ids[e]] = {-1, -1};
            if (ncross == 2) {
              add_segment(ids[cross[0]], ids[cross[1]]);
            } else {  // alternating signs; pair around one diagonal
              const double mean = (v[c0] + v[c1] + v[c2] + v[c3]) / 4.0;
              const bool center_inside = mean < iso;
              const bool c0_inside = v[c0] < iso;
              // Join the crossings around the corners whose sign matches
              // the face center, keeping that region connected.
              if (c0_inside == center_inside) {
                add_segment(ids[3], ids[0]);  // around c0
                add_segment(ids[1], ids[2]);  // around c2
              } else {
                add_segment(ids[0], ids[1]);  // around c1
                add_segment(ids[2], ids[3]);  // around c3
              }
            }
          }
        }

        // Trace loops and fan-triangulate, oriented along the field
        // gradient (outward for an SDF).
        std::map<int, bool> used;
        for (const auto& [start, nbrs] : next) {
          if (used[start]) continue;
          std::vector<int> loop;
          int cur = start, prev = -1;
          do {
            loop.push_back(cur);
            used[cur] = true;
            const auto& nn = next[cur];
            const int nxt = (nn[0] != prev && nn[0] >= 0) ? nn[0] : nn[1];
            prev = cur;
            cur = nxt;
          } while (cur >= 0 && cur != start && loop.size() <= 12);
          if (cur != start || loop.size() < 3) continue;

          Vector3d centroid = Vector3d::Zero(), normal = Vector3d::Zero();
          for (std::size_t e = 0; e < loop.size(); ++e) {
            const Vector3d& a = mesh.vertices[loop[e]];
            const Vector3d& b = mesh.vertices[loop[(e + 1) % loop.size()]];
            centroid += a / loop.size();
            normal += a.cross(b);  // Newell
          }
          // Trilinear gradient of the cell at the centroid.
          Vector3d local =
              (centroid - grid.position(i, j, k)) / grid.spacing;
          Vector3d grad = Vector3d::Zero();
          for (int b = 0; b < 8; ++b) {
            const Vector3i o = corner_offset(b);
            for (int ax = 0; ax < 3; ++ax) {
              double w = o(ax) ? 1.0 : -1.0;
              for (int other = 1; other < 3; ++other) {
                const int oax = (ax + other) % 3;
                w *= o(oax) ? local(oax) : 1.0 - local(oax);
              }
              grad(ax) += w * v[b];
            }
          }
          if (normal.dot(grad) < 0) std::reverse(loop.begin(), loop.end());
          for (std::size_t e = 1; e + 1 < loop.size(); ++e)
            mesh.faces.push_back(
                {loop[0], loop[e], loop[e + 1]});
        }
      }
    }
  }
  return mesh;
}

void transform_mesh(TriMesh& mesh, const Sim3Transform& world_to_object) {
  const Sim3Transform inv = world_to_object.inverse();
  for (auto& v : mesh.vertices) v = inv.apply(v);
}

double surface_area(const TriMesh& mesh) {
  double area = 0;
  for (const auto& f : mesh.faces) {
    const Vector3d& a = mesh.vertices[f(0)];
    area += 0.5 * (mesh.vertices[f(1)] - a)
                      .cross(mesh.vertices[f(2)] - a)
                      .norm();
  }
  return area;
}

TriMesh largest_component(const TriMesh& mesh) {
  if (mesh.faces.empty()) return mesh;
  std::vector<int> parent(mesh.vertices.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (const auto& f : mesh.faces) {
    parent[find(f(1))] = find(f(0));
    parent[find(f(2))] = find(f(0));
  }
  std::map<int, double> area_of;
  for (const auto& f : mesh.faces) {
    const Vector3d& a = mesh.vertices[f(0)];
    area_of[find(f(0))] +=
        0.5 * (mesh.vertices[f(1)] - a).cross(mesh.vertices[f(2)] - a).norm();
  }
  int best = area_of.begin()->first;
  for (const auto& [root, area] : area_of)
    if (area > area_of[best]) best = root;

  TriMesh out;
  std::vector<int> remap(mesh.vertices.size(), -1);
  for (const auto& f : mesh.faces) {
    if (find(f(0)) != best) continue;
    Vector3i nf;
    for (int k = 0; k < 3; ++k) {
      int& id = remap[f(k)];
      if (id < 0) {
        id = static_cast<int>(out.vertices.size());
        out.vertices.push_back(mesh.vertices[f(k)]);
      }
      nf(k) = id;
    }
    out.faces.push_back(nf);
  }
  return out;
}

bool is_watertight(const TriMesh& mesh) {
  if (mesh.faces.empty()) return false;
  std::map<std::pair<int, int>, int> count;
  for (const auto& f : mesh.faces) {
    for (int e = 0; e < 3; ++e) {
      const int a = f(e), b = f((e + 1) % 3);
      if (a == b) return false;
      ++count[{a, b}];
    }
  }
  for (const auto& [edge, c] : count) {
    if (c != 1) return false;
    auto rev = count.find({edge.second, edge.first});
    if (rev == count.end() || rev->second != 1) return false;
  }
  return true;
}

void write_ply(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << mesh.vertices.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  out << "element face " << mesh.faces.size() << "\n";
  out << "property list uchar int vertex_indices\nend_header\n";
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& f : mesh.faces)
    out << "3 " << f(0) << " " << f(1) << " " << f(2) << "\n";
}

void write_obj(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x(), v.y(),
                  v.z());
    out << buf;
  }
  for (const auto& f : mesh.faces)
    out << "f " << f(0) + 1 << " " << f(1) + 1 << " " << f(2) + 1 << "\n";
}

}  // namespace bisdf::mesh
