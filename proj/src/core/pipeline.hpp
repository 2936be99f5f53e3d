#pragma once

#include <string>
#include <vector>

#include "core/decoder.hpp"
#include "core/mesh.hpp"
#include "core/optim.hpp"
#include "core/quadric.hpp"
#include "core/scene.hpp"

namespace bisdf::pipeline {

using decoder::DecoderWeights;
using decoder::VectorXd;

struct PipelineConfig {
  double eps = 0.05;                   // pseudo-point offset
  int max_pixels_per_object_view = 1000;
  int min_mask_pixels = 20;            // view skipped for the object below this
  int min_views = 3;
  int mesh_resolution = 48;
  bool log_stages = true;              // timing lines on stderr
  optim::OptimConfig optimizer = [] {
    // Full-scene refinement benefits from a longer schedule and a stronger
    // code prior than the bare optimizer default.
    optim::OptimConfig c;
    c.reg = 1e-1;
    c.max_iters = 300;
    c.max_points = 3000;
    return c;
  }();
};

class InitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Wall-clock stage log: "[stage] <name> <ms> ms" on stderr.
void log_stage(const std::string& name, double seconds);

// Boundary pixels of a mask in normalized image coordinates; the moments
// fit expects the outline, not the filled region.
std::vector<quadric::Vec2> mask_boundary(const scene::Mask& mask,
                                         const scene::PinholeIntrinsics& intr);

// Ellipsoid-based pose initialization of one object from its masks. Uses
// the class code's coarse semi-axes and scores the rotation candidates with
// the fine decoder on the labeled points.
optim::ObjectEstimate init_object(
    const std::vector<scene::RenderedView>& views, int object_index,
    const scene::SceneSpec& spec, const DecoderWeights& weights,
    const VectorXd& class_code,
    const std::vector<scene::LabeledPoint>& points,
    const PipelineConfig& cfg);

// Decode the (possibly deformed) code into a world-frame mesh.
mesh::TriMesh reconstruct(const DecoderWeights& weights,
                          const VectorXd& class_code,
                          const optim::ObjectEstimate& estimate,
                          int resolution);

struct ObjectResult {
  int object_index = 0;
  std::vector<scene::LabeledPoint> observations;
  optim::ObjectEstimate estimate;
  mesh::TriMesh mesh;  // world frame
};

// render -> observe -> init -> optimize -> reconstruct, per object.
std::vector<ObjectResult> run_pipeline(const scene::SceneSpec& spec,
                                       const DecoderWeights& weights,
                                       const VectorXd& class_code,
                                       const PipelineConfig& cfg);

}  // namespace bisdf::pipeline
