#include "core/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Geometry>

namespace bisdf::scene {

namespace {

constexpr double kHitTol = 1e-4;
constexpr double kMaxRange = 20.0;
constexpr int kMaxSteps = 128;

struct TracedObject {
  const SceneObject* obj = nullptr;
  double scale_wo = 1;   // world-to-object scale
  double lipschitz = 1;  // of the radial norm, object frame
  Vector3d center_w;
  double radius_w = 0;

  // Underestimate of the world distance to the surface.
  double estimate(const Vector3d& x_w) const {
    const double n = obj->shape.radial_norm(obj->world_to_object.apply(x_w));
    return (n - 1.0) / (lipschitz * scale_wo);
  }
  double norm_at(const Vector3d& x_w) const {
    return obj->shape.radial_norm(obj->world_to_object.apply(x_w));
  }
};

// [s0, s1] of the ray o + s*dir against the bounding sphere, empty if s1<s0.
std::pair<double, double> sphere_span(const Vector3d& o, const Vector3d& dir,
                                      const Vector3d& c, double r) {
  const Vector3d oc = o - c;
  const double b = oc.dot(dir);
  const double disc = b * b - (oc.squaredNorm() - r * r);
  if (disc < 0) return {1.0, 0.0};
  const double q = std::sqrt(disc);
  return {-b - q, -b + q};
}

void morph(Mask& m, int radius, bool dilate) {
  if (radius <= 0) return;
  Mask out = m;
  const int rows = static_cast<int>(m.rows()), cols = static_cast<int>(m.cols());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      std::uint8_t v = dilate ? 0 : 255;
      for (int dr = -radius; dr <= radius; ++dr)
        for (int dc = -radius; dc <= radius; ++dc) {
          const int rr = std::clamp(r + dr, 0, rows - 1);
          const int cc = std::clamp(c + dc, 0, cols - 1);
          if (dilate)
            v = std::max(v, m(rr, cc));
          else
            v = std::min(v, m(rr, cc));
        }
      out(r, c) = v;
    }
  m = out;
}

}  // namespace

std::vector<RenderedView> render_views(const SceneSpec& spec) {
  const auto& intr = spec.intrinsics;
  std::vector<TracedObject> traced;
  traced.reserve(spec.objects.size());
  for (const auto& obj : spec.objects) {
    TracedObject t;
    t.obj = &obj;
    t.scale_wo = obj.world_to_object.scale();
    t.lipschitz = obj.shape.radial_norm_lipschitz();
    t.center_w = obj.world_to_object.inverse().apply(Vector3d::Zero());
    t.radius_w = obj.shape.bounding_radius() / t.scale_wo;
    traced.push_back(t);
  }

  std::vector<RenderedView> views;
  views.reserve(spec.cameras.size());
  for (size_t k = 0; k < spec.cameras.size(); ++k) {
    RenderedView view;
    view.view_id = static_cast<int>(k);
    const Matrix4d& C = spec.cameras[k];
    const Vector3d origin = C.block<3, 1>(0, 3);
    const Eigen::Matrix3d R = C.block<3, 3>(0, 0);

    for (const auto& t : traced)
      if (t.norm_at(origin) < 1.0) view.skipped = true;
    if (view.skipped) {
      views.push_back(std::move(view));
      continue;
    }

    view.depth = DepthMap::Zero(intr.height, intr.width);
    view.masks.assign(spec.objects.size(),
                      Mask::Zero(intr.height, intr.width));

    for (int r = 0; r < intr.height; ++r) {
      for (int c = 0; c < intr.width; ++c) {
        const Vector3d pbar((c - intr.cx) / intr.fx, (r - intr.cy) / intr.fy,
                            1.0);
        const double pnorm = pbar.norm();
        const Vector3d dir = (R * pbar).normalized();

        double s_min = kMaxRange, s_max = 0.0;
        bool any = false;
        for (const auto& t : traced) {
          auto [s0, s1] = sphere_span(origin, dir, t.center_w, t.radius_w);
          if (s1 < s0 || s1 < 0) continue;
          any = true;
          s_min = std::min(s_min, std::max(s0, 1e-4));
          s_max = std::max(s_max, std::min(s1, kMaxRange));
        }
        if (!any) continue;

        double s = s_min;
        int hit = -1;
        for (int step = 0; step < kMaxSteps && s <= s_max; ++step) {
          const Vector3d x = origin + s * dir;
          double d_min = std::numeric_limits<double>::infinity();
          int j_min = -1;
          for (size_t j = 0; j < traced.size(); ++j) {
            const double d = traced[j].estimate(x);
            if (d < d_min) {
              d_min = d;
              j_min = static_cast<int>(j);
            }
          }
          if (d_min < kHitTol) {
            // Walk into the surface, then bisect the radial norm crossing.
            const auto& t = traced[j_min];
            double s_out = s, s_in = s;
            bool crossed = t.norm_at(origin + s * dir) < 1.0;
            for (int w = 0; w < 60 && !crossed; ++w) {
              s_out = s_in;
              s_in += kHitTol;
              crossed = t.norm_at(origin + s_in * dir) < 1.0;
            }
            if (!crossed) {  // grazing ray, resume marching past it
              s = s_in + kHitTol;
              continue;
            }
            for (int b = 0; b < 60; ++b) {
              const double mid = 0.5 * (s_out + s_in);
              (t.norm_at(origin + mid * dir) < 1.0 ? s_in : s_out) = mid;
            }
            hit = j_min;
            s = 0.5 * (s_out + s_in);
            break;
          }
          s += d_min;
        }
        if (hit >= 0) {
          view.depth(r, c) = static_cast<float>(s / pnorm);
          view.masks[hit](r, c) = 255;
        }
      }
    }

    if (spec.noise.depth_sigma > 0) {
      std::mt19937_64 rng(spec.seed ^ (0xD1B54A32D192ED03ULL + k));
      std::normal_distribution<double> g(0.0, spec.noise.depth_sigma);
      for (int r = 0; r < intr.height; ++r)
        for (int c = 0; c < intr.width; ++c)
          if (view.depth(r, c) > 0)
            view.depth(r, c) += static_cast<float>(g(rng));
    }
    for (auto& m : view.masks) {
      morph(m, spec.noise.mask_erode, false);
      morph(m, spec.noise.mask_dilate, true);
    }
    views.push_back(std::move(view));
  }
  return views;
}

std::vector<LabeledPoint> sample_observation(
    const DepthMap& depth, const Mask& mask, const PinholeIntrinsics& intr,
    const Matrix4d& camera_to_world, int view_id, double eps, int max_pixels,
    ObservationStats* stats) {
  int total = 0;
  for (int r = 0; r < intr.height; ++r)
    for (int c = 0; c < intr.width; ++c)
      if (mask(r, c)) ++total;
  const int stride = std::max(1, (total + max_pixels - 1) / max_pixels);

  std::vector<LabeledPoint> out;
  out.reserve(3 * std::min(total, max_pixels));
  ObservationStats st;
  int idx = 0;
  const Eigen::Matrix3d R = camera_to_world.block<3, 3>(0, 0);
  const Vector3d t = camera_to_world.block<3, 1>(0, 3);
  for (int r = 0; r < intr.height; ++r) {
    for (int c = 0; c < intr.width; ++c) {
      if (!mask(r, c)) continue;
      if (idx++ % stride != 0) continue;
      const double D = depth(r, c);
      if (D <= 0) {
        ++st.skipped_nonpositive_depth;
        continue;
      }
      const Vector3d pbar((c - intr.cx) / intr.fx, (r - intr.cy) / intr.fy,
                          1.0);
      const double pnorm = pbar.norm();
      ++st.used_pixels;
      // Label +eps sits in front of the surface (outside), -eps behind.
      for (double label : {0.0, eps, -eps}) {
        const Vector3d y = (D - label / pnorm) * pbar;
        out.push_back({R * y + t, label, view_id, Vector2i(c, r)});
        if (eps == 0.0) break;
      }
    }
  }
  if (stats) *stats = st;
  return out;
}

SceneSpec random_scene(int n_objects, int n_views, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ua(0.15, 0.5);
  std::uniform_real_distribution<double> ue(0.8, 1.6);
  std::uniform_real_distribution<double> uscale(0.8, 1.25);
  std::uniform_real_distribution<double> uyaw(-M_PI, M_PI);

  SceneSpec spec;
  spec.seed = seed;
  for (int i = 0; i < n_objects; ++i) {
    SceneObject obj;
    obj.class_id = i;
    do {
      obj.shape.a = Vector3d(ua(rng), ua(rng), ua(rng));
      obj.shape.e1 = ue(rng);
      obj.shape.e2 = ue(rng);
    } while (obj.shape.a.minCoeff() < 0.05);

    const double ring = n_objects > 1 ? 0.9 : 0.0;
    const double phi = 2.0 * M_PI * i / std::max(1, n_objects);
    const Vector3d center(ring * std::cos(phi), ring * std::sin(phi),
                          0.1 * (uscale(rng) - 1.0));
    const double size = uscale(rng);  // object-to-world scale
    const double yaw = uyaw(rng);
    Eigen::Matrix3d Rz;
    Rz = Eigen::AngleAxisd(yaw, Vector3d::UnitZ());
    const auto object_to_world = Sim3Transform::FromParts(size, Rz, center);
    obj.world_to_object = object_to_world.inverse();
    spec.objects.push_back(std::move(obj));
  }

  for (int k = 0; k < n_views; ++k) {
    const double phi = 2.0 * M_PI * k / std::max(1, n_views);
    const Vector3d eye(2.4 * std::cos(phi), 2.4 * std::sin(phi), 1.4);
    const Vector3d target(0, 0, 0);
    const Vector3d fwd = (target - eye).normalized();
    Vector3d right = fwd.cross(Vector3d::UnitZ());
    right.normalize();
    const Vector3d down = fwd.cross(right);
    Matrix4d C = Matrix4d::Identity();
    C.block<3, 1>(0, 0) = right;
    C.block<3, 1>(0, 1) = down;
    C.block<3, 1>(0, 2) = fwd;
    C.block<3, 1>(0, 3) = eye;
    spec.cameras.push_back(C);
  }
  return spec;
}

}  // namespace bisdf::scene
