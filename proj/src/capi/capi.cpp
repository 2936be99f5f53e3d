#include "bisdf/bisdf.h"

#include <exception>
#include <filesystem>
#include <fstream>
#include <string>

#include <fmt/format.h>
#include <json.hpp>

#include "core/io.hpp"
#include "core/metrics.hpp"
#include "core/pipeline.hpp"
#include "core/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bisdf;

struct bisdf_model {
  decoder::DecoderWeights weights;
  std::vector<decoder::LatentCode> codes;
  Eigen::VectorXd class_code;
};

namespace {

thread_local std::string g_last_error = "no error";

template <typename Fn>
bisdf_status guard(Fn&& fn) {
  try {
    fn();
    return BISDF_OK;
  } catch (const io::IoError& e) {
    g_last_error = e.what();
    return BISDF_ERROR_IO;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return BISDF_ERROR_INVALID_ARGUMENT;
  } catch (const quadric::DegenerateObservationError& e) {
    g_last_error = e.what();
    return BISDF_ERROR_DEGENERATE_INPUT;
  } catch (const quadric::InsufficientViewsError& e) {
    g_last_error = e.what();
    return BISDF_ERROR_DEGENERATE_INPUT;
  } catch (const quadric::AmbiguousSolutionError& e) {
    g_last_error = e.what();
    return BISDF_ERROR_DEGENERATE_INPUT;
  } catch (const quadric::NonEllipsoidError& e) {
    g_last_error = e.what();
    return BISDF_ERROR_DEGENERATE_INPUT;
  } catch (const pipeline::InitError& e) {
    g_last_error = e.what();
    return BISDF_ERROR_DEGENERATE_INPUT;
  } catch (const optim::DivergenceError& e) {
    g_last_error = e.what();
    return BISDF_ERROR_DIVERGED;
  } catch (const trainer::TrainingError& e) {
    g_last_error = e.what();
    return BISDF_ERROR_DIVERGED;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return BISDF_ERROR_INTERNAL;
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

json parse_config(const char* config_json) {
  if (!config_json || !*config_json) return json::object();
  try {
    return json::parse(config_json);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("bad config JSON: ") + e.what());
  }
}

trainer::TrainConfig train_config_from_json(const json& j) {
  trainer::TrainConfig cfg;
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.decay = j.value("decay", cfg.decay);
  cfg.coarse_decay_every = j.value("coarse_decay_every", cfg.coarse_decay_every);
  cfg.fine_decay_every = j.value("fine_decay_every", cfg.fine_decay_every);
  cfg.steps_per_epoch = j.value("steps_per_epoch", cfg.steps_per_epoch);
  cfg.fine_batch = j.value("fine_batch", cfg.fine_batch);
  cfg.coarse_batch = j.value("coarse_batch", cfg.coarse_batch);
  cfg.latent_dim = j.value("latent_dim", cfg.latent_dim);
  cfg.hidden = j.value("hidden", cfg.hidden);
  cfg.coarse_hidden = j.value("coarse_hidden", cfg.coarse_hidden);
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.beta = j.value("beta", cfg.beta);
  cfg.gamma = j.value("gamma", cfg.gamma);
  cfg.huber_delta = j.value("huber_delta", cfg.huber_delta);
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

optim::OptimConfig optim_config_from_json(const json& j) {
  optim::OptimConfig cfg;
  cfg.beta = j.value("beta", cfg.beta);
  cfg.gamma = j.value("gamma", cfg.gamma);
  cfg.reg = j.value("reg", cfg.reg);
  cfg.huber_delta = j.value("huber_delta", cfg.huber_delta);
  cfg.eta_pose = j.value("eta_pose", cfg.eta_pose);
  cfg.eta_code = j.value("eta_code", cfg.eta_code);
  cfg.max_iters = j.value("max_iters", cfg.max_iters);
  cfg.tol = j.value("tol", cfg.tol);
  cfg.max_points = j.value("max_points", cfg.max_points);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.axis_min = j.value("axis_min", cfg.axis_min);
  cfg.axis_max = j.value("axis_max", cfg.axis_max);
  cfg.scale_min = j.value("scale_min", cfg.scale_min);
  cfg.scale_max = j.value("scale_max", cfg.scale_max);
  return cfg;
}

pipeline::PipelineConfig pipeline_config_from_json(const json& j) {
  pipeline::PipelineConfig cfg;
  cfg.eps = j.value("eps", cfg.eps);
  cfg.max_pixels_per_object_view =
      j.value("max_pixels", cfg.max_pixels_per_object_view);
  cfg.min_mask_pixels = j.value("min_mask_pixels", cfg.min_mask_pixels);
  cfg.min_views = j.value("min_views", cfg.min_views);
  cfg.mesh_resolution = j.value("mesh_resolution", cfg.mesh_resolution);
  cfg.log_stages = j.value("log_stages", cfg.log_stages);
  if (j.contains("optimizer"))
    cfg.optimizer = optim_config_from_json(j["optimizer"]);
  return cfg;
}

std::string depth_path(const std::string& dir, int view) {
  return fmt::format("{}/depth_{:03d}.pfm", dir, view);
}
std::string mask_path(const std::string& dir, int view, int obj) {
  return fmt::format("{}/mask_{:03d}_{:02d}.pgm", dir, view, obj);
}
std::string obs_path(const std::string& dir, int obj) {
  return fmt::format("{}/obs_{:02d}.ndjson", dir, obj);
}
std::string mesh_path(const std::string& dir, int obj) {
  return fmt::format("{}/mesh_{:02d}.ply", dir, obj);
}

// Views re-read from a render directory; missing depth means skipped.
std::vector<scene::RenderedView> load_views(const scene::SceneSpec& spec,
                                            const std::string& dir) {
  std::vector<scene::RenderedView> views;
  for (std::size_t k = 0; k < spec.cameras.size(); ++k) {
    scene::RenderedView v;
    v.view_id = static_cast<int>(k);
    const auto dpath = depth_path(dir, v.view_id);
    if (!fs::exists(dpath)) {
      v.skipped = true;
    } else {
      v.depth = io::read_pfm(dpath);
      for (std::size_t i = 0; i < spec.objects.size(); ++i)
        v.masks.push_back(
            io::read_pgm(mask_path(dir, v.view_id, static_cast<int>(i))));
    }
    views.push_back(std::move(v));
  }
  return views;
}

void write_views(const std::vector<scene::RenderedView>& views,
                 const std::string& dir) {
  for (const auto& v : views) {
    if (v.skipped) continue;
    io::write_pfm(v.depth, depth_path(dir, v.view_id));
    for (std::size_t i = 0; i < v.masks.size(); ++i)
      io::write_pgm(v.masks[i], mask_path(dir, v.view_id, static_cast<int>(i)));
  }
}

void write_loss_csv(const std::vector<trainer::LossRecord>& trace,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io::IoError("cannot write " + path);
  out << "epoch,coarse,fine,kl\n";
  for (const auto& r : trace)
    out << fmt::format("{},{:.9g},{:.9g},{:.9g}\n", r.epoch, r.coarse, r.fine,
                       r.kl);
}

Eigen::VectorXd model_class_code(const bisdf_model& m) {
  return m.class_code;
}

std::vector<Eigen::Vector3d> ground_truth_surface(
    const scene::SceneObject& obj, int n_eta = 24, int n_omega = 48) {
  const auto object_to_world = obj.world_to_object.inverse();
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(n_eta * n_omega);
  for (int i = 1; i < n_eta; ++i) {
    const double eta = -M_PI_2 + M_PI * i / n_eta;
    for (int j = 0; j < n_omega; ++j) {
      const double omega = -M_PI + 2.0 * M_PI * j / n_omega;
      pts.push_back(object_to_world.apply(obj.shape.surface_point(eta, omega)));
    }
  }
  return pts;
}

}  // namespace

extern "C" {

const char* bisdf_last_error(void) { return g_last_error.c_str(); }

const char* bisdf_version(void) { return "1.0.0"; }

bisdf_status bisdf_generate_corpus(int n_instances, uint64_t seed,
                                   const char* out_path) {
  return guard([&] {
    require(n_instances > 0, "n_instances must be positive");
    require(out_path, "out_path is required");
    trainer::FamilyParams family;
    io::save_corpus(trainer::generate_corpus(n_instances, family, seed),
                    out_path);
  });
}

bisdf_status bisdf_train(const char* corpus_path, const char* weights_path,
                         const char* loss_csv_path, const char* config_json) {
  return guard([&] {
    require(corpus_path && weights_path, "corpus and weights paths required");
    const auto cfg = train_config_from_json(parse_config(config_json));
    const auto corpus = io::load_corpus(corpus_path);
    auto result = trainer::train(corpus, cfg);
    decoder::save_weights(result.weights, weights_path, &result.codes);
    if (loss_csv_path) write_loss_csv(result.trace, loss_csv_path);
  });
}

bisdf_status bisdf_generate_scene(int n_objects, int n_views, uint64_t seed,
                                  const char* config_json,
                                  const char* out_scene_json) {
  return guard([&] {
    require(n_objects > 0 && n_views > 0, "need objects and views");
    require(out_scene_json, "output path required");
    auto spec = scene::random_scene(n_objects, n_views, seed);
    const json j = parse_config(config_json);
    if (j.contains("intrinsics") || j.contains("noise")) {
      json merged = io::scene_to_json(spec);
      for (const auto& key : {"intrinsics", "noise"})
        if (j.contains(key))
          for (auto it = j[key].begin(); it != j[key].end(); ++it)
            merged[key][it.key()] = it.value();
      spec = io::scene_from_json(merged);
    }
    io::save_scene(spec, out_scene_json);
  });
}

bisdf_status bisdf_render(const char* scene_json, const char* out_dir,
                          const char* config_json) {
  return guard([&] {
    require(scene_json && out_dir, "scene and output dir required");
    const auto spec = io::load_scene(scene_json);
    const auto cfg = pipeline_config_from_json(parse_config(config_json));
    fs::create_directories(out_dir);
    const auto views = scene::render_views(spec);
    write_views(views, out_dir);
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
      std::vector<scene::LabeledPoint> pts;
      for (const auto& v : views) {
        if (v.skipped) continue;
        auto p = scene::sample_observation(
            v.depth, v.masks[i], spec.intrinsics, spec.cameras[v.view_id],
            v.view_id, cfg.eps, cfg.max_pixels_per_object_view);
        pts.insert(pts.end(), p.begin(), p.end());
      }
      io::save_observations(pts, obs_path(out_dir, static_cast<int>(i)));
    }
  });
}

bisdf_status bisdf_model_load(const char* weights_path, bisdf_model** out) {
  if (!out) {
    g_last_error = "output handle required";
    return BISDF_ERROR_INVALID_ARGUMENT;
  }
  *out = nullptr;
  return guard([&] {
    require(weights_path, "weights path required");
    auto model = std::make_unique<bisdf_model>();
    model->weights = decoder::load_weights(weights_path, &model->codes);
    model->class_code = Eigen::VectorXd::Zero(model->weights.latent_dim);
    for (const auto& c : model->codes)
      model->class_code += c.mu / static_cast<double>(model->codes.size());
    *out = model.release();
  });
}

void bisdf_model_free(bisdf_model* model) { delete model; }

int bisdf_model_latent_dim(const bisdf_model* model) {
  return model ? model->weights.latent_dim : 0;
}

bisdf_status bisdf_init_poses(bisdf_model* model, const char* scene_json,
                              const char* render_dir,
                              const char* out_estimates_json) {
  return guard([&] {
    require(model && scene_json && render_dir && out_estimates_json,
            "model, scene, render dir and output required");
    const auto spec = io::load_scene(scene_json);
    const auto views = load_views(spec, render_dir);
    pipeline::PipelineConfig cfg;
    std::vector<optim::ObjectEstimate> estimates;
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
      const auto pts =
          io::load_observations(obs_path(render_dir, static_cast<int>(i)));
      estimates.push_back(pipeline::init_object(views, static_cast<int>(i),
                                                spec, model->weights,
                                                model_class_code(*model), pts,
                                                cfg));
    }
    io::save_estimates(estimates, out_estimates_json);
  });
}

bisdf_status bisdf_optimize(bisdf_model* model, const char* scene_json,
                            const char* render_dir,
                            const char* estimates_json,
                            const char* out_estimates_json,
                            const char* config_json) {
  return guard([&] {
    require(model && scene_json && render_dir && estimates_json &&
                out_estimates_json,
            "model, scene, render dir, estimates and output required");
    const auto spec = io::load_scene(scene_json);
    const auto cfg = optim_config_from_json(parse_config(config_json));
    auto estimates = io::load_estimates(estimates_json);
    require(estimates.size() == spec.objects.size(),
            "estimate count does not match the scene");
    for (std::size_t i = 0; i < estimates.size(); ++i) {
      const auto pts =
          io::load_observations(obs_path(render_dir, static_cast<int>(i)));
      estimates[i] =
          optim::optimize(model->weights, model_class_code(*model), pts,
                          estimates[i].world_to_object, cfg);
    }
    io::save_estimates(estimates, out_estimates_json);
  });
}

bisdf_status bisdf_mesh(bisdf_model* model, const char* estimates_json,
                        const char* out_dir, int resolution) {
  return guard([&] {
    require(model && estimates_json && out_dir, "model and paths required");
    require(resolution >= 8 && resolution <= 512,
            "resolution out of range [8, 512]");
    fs::create_directories(out_dir);
    const auto estimates = io::load_estimates(estimates_json);
    for (std::size_t i = 0; i < estimates.size(); ++i) {
      const auto m = pipeline::reconstruct(
          model->weights, model_class_code(*model), estimates[i], resolution);
      mesh::write_ply(m, mesh_path(out_dir, static_cast<int>(i)));
    }
  });
}

bisdf_status bisdf_evaluate(bisdf_model* model, const char* scene_json,
                            const char* estimates_json, const char* out_csv) {
  return guard([&] {
    require(model && scene_json && estimates_json && out_csv,
            "model and paths required");
    const auto spec = io::load_scene(scene_json);
    const auto estimates = io::load_estimates(estimates_json);
    require(estimates.size() == spec.objects.size(),
            "estimate count does not match the scene");
    std::ofstream out(out_csv);
    if (!out) throw io::IoError(std::string("cannot write ") + out_csv);
    out << "object,translation_m,rotation_deg,scale_pct,pose_accurate,"
           "fitting_rate,bbox_iou\n";
    for (std::size_t i = 0; i < estimates.size(); ++i) {
      const auto gt = spec.objects[i].world_to_object.inverse();
      const auto pred = estimates[i].world_to_object.inverse();
      const auto err = metrics::pose_errors(pred, gt);
      const auto m = pipeline::reconstruct(
          model->weights, model_class_code(*model), estimates[i], 32);
      const auto gt_pts = ground_truth_surface(spec.objects[i]);
      const double rate = metrics::fitting_rate(m.vertices, gt_pts);
      const double iou = metrics::bbox_iou_3d(m.vertices, gt_pts);
      out << fmt::format("{},{:.6g},{:.6g},{:.6g},{},{:.6g},{:.6g}\n", i,
                         err.translation_m, err.rotation_deg, err.scale_pct,
                         metrics::pose_accurate(err) ? 1 : 0, rate, iou);
    }
  });
}

bisdf_status bisdf_run_pipeline(bisdf_model* model, const char* scene_json,
                                const char* out_dir,
                                const char* config_json) {
  return guard([&] {
    require(model && scene_json && out_dir,
            "model, scene and output dir required");
    const auto spec = io::load_scene(scene_json);
    const auto cfg = pipeline_config_from_json(parse_config(config_json));
    fs::create_directories(out_dir);
    const auto results = pipeline::run_pipeline(
        spec, model->weights, model_class_code(*model), cfg);
    std::vector<optim::ObjectEstimate> estimates;
    for (const auto& r : results) {
      estimates.push_back(r.estimate);
      io::save_observations(r.observations, obs_path(out_dir, r.object_index));
      mesh::write_ply(r.mesh, mesh_path(out_dir, r.object_index));
    }
    io::save_estimates(estimates, std::string(out_dir) + "/estimates.json");
  });
}

}  // extern "C"
