#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "core/lie.hpp"
#include "core/superellipsoid.hpp"

namespace bisdf::scene {

using Eigen::Matrix4d;
using Eigen::Vector2i;
using Eigen::Vector3d;
using lie::Sim3Transform;

struct PinholeIntrinsics {
  double fx = 320, fy = 320, cx = 160, cy = 120;
  int width = 320, height = 240;
};

struct SceneObject {
  int class_id = 0;
  shape::Superellipsoid shape;   // canonical (object) frame
  Sim3Transform world_to_object; // T_ow; world x maps to shape frame
};

struct NoiseModel {
  double depth_sigma = 0.0;
  int mask_erode = 0;
  int mask_dilate = 0;
};

struct SceneSpec {
  std::vector<SceneObject> objects;
  std::vector<Matrix4d> cameras;  // camera-to-world C_k, optical frame (z fwd)
  PinholeIntrinsics intrinsics;
  NoiseModel noise;
  std::uint64_t seed = 0;
};

using DepthMap = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                               Eigen::RowMajor>;
using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>;

struct RenderedView {
  int view_id = 0;
  bool skipped = false;  // camera center inside an object
  DepthMap depth;        // z-depth along the optical axis, 0 where no hit
  std::vector<Mask> masks;  // one per object, 255 = hit
};

// Sphere-traces the object union per pixel. Depth stores the z coordinate
// of the hit in the camera frame, not the ray length. Views whose camera
// center lies inside any object are flagged skipped and left empty.
std::vector<RenderedView> render_views(const SceneSpec& spec);

struct LabeledPoint {
  Vector3d x;      // world
  double d = 0;    // signed distance label
  int view = 0;
  Vector2i pixel = Vector2i::Zero();
};

struct ObservationStats {
  int skipped_nonpositive_depth = 0;
  int used_pixels = 0;
};

// Back-projects masked pixels into world points on / in front of / behind
// the surface (labels 0, +eps, -eps; in front of the surface is outside).
// Pixels are decimated by a uniform stride so at most max_pixels contribute.
std::vector<LabeledPoint> sample_observation(
    const DepthMap& depth, const Mask& mask, const PinholeIntrinsics& intr,
    const Matrix4d& camera_to_world, int view_id, double eps,
    int max_pixels = 1000, ObservationStats* stats = nullptr);

// Random scene: shapes drawn from the corpus family, poses on a table-ish
// layout, cameras on a ring looking at the centroid.
SceneSpec random_scene(int n_objects, int n_views, std::uint64_t seed);

}  // namespace bisdf::scene
