#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "core/lie.hpp"

namespace bisdf::mesh {

using Eigen::Vector3d;
using Eigen::Vector3i;
using lie::Sim3Transform;

struct SdfGrid {
  int n = 0;            // samples per axis
  Vector3d origin;      // position of sample (0,0,0)
  double spacing = 0;   // uniform step
  std::vector<double> values;  // x fastest, then y, then z

  double at(int i, int j, int k) const {
    return values[(static_cast<std::size_t>(k) * n + j) * n + i];
  }
  Vector3d position(int i, int j, int k) const {
    return origin + spacing * Vector3d(i, j, k);
  }
};

// Samples f over [-half_extent, half_extent]^3 with n samples per axis.
SdfGrid sample_sdf_grid(const std::function<double(const Vector3d&)>& f,
                        int n, double half_extent = 1.1);

struct TriMesh {
  std::vector<Vector3d> vertices;
  std::vector<Vector3i> faces;  // outward orientation (toward positive f)
};

// Isosurface extraction with vertices on grid-edge zero crossings. Ambiguous
// faces are resolved by the face mean value, which depends only on the
// shared face, so neighboring cells always agree and the result is
// watertight on closed surfaces.
TriMesh marching_cubes(const SdfGrid& grid, double iso = 0.0);

// Maps object-frame vertices to world via the inverse of world_to_object.
void transform_mesh(TriMesh& mesh, const Sim3Transform& world_to_object);

double surface_area(const TriMesh& mesh);

// Keeps only the vertex-connected component with the largest total triangle
// area, dropping unreferenced vertices. Empty meshes pass through unchanged.
TriMesh largest_component(const TriMesh& mesh);

// Every undirected edge shared by exactly two faces with opposite direction.
bool is_watertight(const TriMesh& mesh);

void write_ply(const TriMesh& mesh, const std::string& path);
void write_obj(const TriMesh& mesh, const std::string& path);

}  // namespace bisdf::mesh
