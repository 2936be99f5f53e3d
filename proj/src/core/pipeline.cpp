#include "core/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

namespace bisdf::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

void log_stage(const std::string& name, double seconds) {
  std::fprintf(stderr, "[stage] %s %.1f ms\n", name.c_str(),
               1e3 * seconds);
}

std::vector<quadric::Vec2> mask_boundary(
    const scene::Mask& mask, const scene::PinholeIntrinsics& intr) {
  std::vector<quadric::Vec2> out;
  const int rows = static_cast<int>(mask.rows());
  const int cols = static_cast<int>(mask.cols());
  auto off = [&](int r, int c) {
    return r < 0 || c < 0 || r >= rows || c >= cols || !mask(r, c);
  };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (!mask(r, c)) continue;
      if (off(r - 1, c) || off(r + 1, c) || off(r, c - 1) || off(r, c + 1))
        out.push_back({(c - intr.cx) / intr.fx, (r - intr.cy) / intr.fy});
    }
  return out;
}

optim::ObjectEstimate init_object(
    const std::vector<scene::RenderedView>& views, int object_index,
    const scene::SceneSpec& spec, const DecoderWeights& weights,
    const VectorXd& class_code,
    const std::vector<scene::LabeledPoint>& points,
    const PipelineConfig& cfg) {
  std::vector<quadric::FittedEllipse> ellipses;
  std::vector<quadric::CameraFrame> cameras;
  for (const auto& view : views) {
    if (view.skipped) continue;
    const auto& mask = view.masks[object_index];
    int count = 0;
    for (int r = 0; r < mask.rows() && count < cfg.min_mask_pixels; ++r)
      for (int c = 0; c < mask.cols(); ++c)
        if (mask(r, c)) ++count;
    if (count < cfg.min_mask_pixels) continue;
    const auto boundary = mask_boundary(mask, spec.intrinsics);
    if (static_cast<int>(boundary.size()) < 5) continue;
    ellipses.push_back(quadric::fit_ellipse(boundary));
    cameras.push_back(
        quadric::make_camera(spec.cameras[view.view_id], view.view_id));
  }
  if (static_cast<int>(ellipses.size()) < cfg.min_views)
    throw InitError("object seen in too few views: " +
                    std::to_string(ellipses.size()));

  const auto M = quadric::build_system(ellipses, cameras);
  const auto Q = quadric::solve_dual_quadric(M);
  const Eigen::Vector3d u = decoder::coarse_decode(weights, class_code);

  // Rank the axis-flip candidates by the fine decoder on the observations.
  auto score = [&](const lie::Sim3Transform& object_to_world) {
    const auto T = object_to_world.inverse();
    double total = 0;
    int n = 0;
    for (const auto& pt : points) {
      if (n >= 500) break;
      total += optim::huber(
          optim::fine_residual(weights, class_code, pt, T,
                               VectorXd::Zero(class_code.size())),
          cfg.optimizer.huber_delta);
      ++n;
    }
    return total;
  };
  std::function<double(const lie::Sim3Transform&)> scorer;
  if (!points.empty()) scorer = score;
  const auto rec = quadric::recover_pose(Q, u, scorer);

  optim::ObjectEstimate est;
  est.world_to_object = rec.object_to_world.inverse();
  est.delta_z = VectorXd::Zero(class_code.size());
  return est;
}

mesh::TriMesh reconstruct(const DecoderWeights& weights,
                          const VectorXd& class_code,
                          const optim::ObjectEstimate& estimate,
                          int resolution) {
  const VectorXd code = class_code + estimate.delta_z;
  // Extract within the coarse support only: the decoder is untrained far
  // from the shape, where spurious zero crossings would otherwise add
  // phantom mesh components.
  const Eigen::Vector3d u = decoder::coarse_decode(weights, code);
  const double half_extent =
      std::min(1.1, 1.4 * u.maxCoeff() + 0.05);
  auto grid = mesh::sample_sdf_grid(
      [&](const Eigen::Vector3d& x) {
        return decoder::fine_decode(weights, x, code);
      },
      resolution, half_extent);
  // Spurious decoder zero crossings can survive inside the support; the
  // object is the dominant connected surface.
  auto m = mesh::largest_component(mesh::marching_cubes(grid));
  mesh::transform_mesh(m, estimate.world_to_object);
  return m;
}

std::vector<ObjectResult> run_pipeline(const scene::SceneSpec& spec,
                                       const DecoderWeights& weights,
                                       const VectorXd& class_code,
                                       const PipelineConfig& cfg) {
  auto t0 = Clock::now();
  const auto views = scene::render_views(spec);
  if (cfg.log_stages) log_stage("render", seconds_since(t0));

  std::vector<ObjectResult> results(spec.objects.size());
  t0 = Clock::now();
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    results[i].object_index = static_cast<int>(i);
    for (const auto& view : views) {
      if (view.skipped) continue;
      auto pts = scene::sample_observation(
          view.depth, view.masks[i], spec.intrinsics,
          spec.cameras[view.view_id], view.view_id, cfg.eps,
          cfg.max_pixels_per_object_view);
      results[i].observations.insert(results[i].observations.end(),
                                     pts.begin(), pts.end());
    }
  }
  if (cfg.log_stages) log_stage("observe", seconds_since(t0));

  t0 = Clock::now();
  for (auto& res : results)
    res.estimate = init_object(views, res.object_index, spec, weights,
                               class_code, res.observations, cfg);
  if (cfg.log_stages) log_stage("init", seconds_since(t0));

  t0 = Clock::now();
  for (auto& res : results)
    res.estimate = optim::optimize(weights, class_code, res.observations,
                                   res.estimate.world_to_object,
                                   cfg.optimizer);
  if (cfg.log_stages) log_stage("optimize", seconds_since(t0));

  t0 = Clock::now();
  for (auto& res : results)
    res.mesh = reconstruct(weights, class_code, res.estimate,
                           cfg.mesh_resolution);
  if (cfg.log_stages) log_stage("mesh", seconds_since(t0));
  return results;
}

}  // namespace bisdf::pipeline
