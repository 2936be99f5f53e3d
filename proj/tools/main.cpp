#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "bisdf/bisdf.h"

namespace {

int fail(bisdf_status status) {
  if (status == BISDF_OK) return 0;
  std::fprintf(stderr, "error: %s\n", bisdf_last_error());
  return 1;
}

// --config accepts inline JSON or @path-to-file.
std::string resolve_config(const std::string& config) {
  if (config.empty() || config[0] != '@') return config;
  std::ifstream in(config.substr(1));
  if (!in) throw CLI::ValidationError("--config file not found: " + config);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// The stage functions take one JSON config; fold the --seed shorthand in.
std::string with_seed(const std::string& config,
                      const std::optional<std::uint64_t>& seed) {
  if (!seed) return config;
  if (config.empty()) return "{\"seed\":" + std::to_string(*seed) + "}";
  const auto pos = config.find_last_of('}');
  if (pos == std::string::npos) return config;
  std::string out = config.substr(0, pos);
  out += (config.find(':') == std::string::npos ? "" : ",");
  out += "\"seed\":" + std::to_string(*seed) + "}";
  return out;
}

struct ModelHandle {
  bisdf_model* model = nullptr;
  ~ModelHandle() { bisdf_model_free(model); }
  int load(const std::string& path) {
    return fail(bisdf_model_load(path.c_str(), &model));
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint pose and shape estimation from depth and masks"};
  app.require_subcommand(1);
  app.fallthrough();  // lets --seed/--config/--jobs follow the subcommand
  app.set_version_flag("--version", bisdf_version());

  std::optional<std::uint64_t> seed;
  int jobs = 1;
  app.add_option("--seed", seed, "Seed for the stage RNG")->group("Global");
  app.add_option("--jobs", jobs,
                 "Reserved; the implementation is single threaded")
      ->group("Global");

  std::string config;
  app.add_option("--config", config,
                 "Stage config as inline JSON or @file.json")
      ->group("Global");

  int exit_code = 0;

  // gen-corpus
  auto* gen_corpus = app.add_subcommand(
      "gen-corpus", "Generate a deterministic training corpus");
  int instances = 10;
  std::string out_path;
  gen_corpus->add_option("--instances", instances, "Number of shapes");
  gen_corpus->add_option("--out", out_path, "Output corpus file")->required();
  gen_corpus->callback([&] {
    exit_code = fail(
        bisdf_generate_corpus(instances, seed.value_or(0), out_path.c_str()));
  });

  // train
  auto* train = app.add_subcommand("train", "Train the bi-level decoder");
  std::string corpus_path, weights_path, loss_csv;
  train->add_option("--corpus", corpus_path, "Corpus file")->required();
  train->add_option("--weights", weights_path, "Output weights")->required();
  train->add_option("--loss-csv", loss_csv, "Per-epoch loss trace");
  train->callback([&] {
    const auto cfg = with_seed(resolve_config(config), seed);
    exit_code = fail(bisdf_train(corpus_path.c_str(), weights_path.c_str(),
                                 loss_csv.empty() ? nullptr : loss_csv.c_str(),
                                 cfg.empty() ? nullptr : cfg.c_str()));
  });

  // gen-scene
  auto* gen_scene =
      app.add_subcommand("gen-scene", "Generate a random synthetic scene");
  int objects = 3, views = 8;
  gen_scene->add_option("--objects", objects, "Object count");
  gen_scene->add_option("--views", views, "Camera count");
  gen_scene->add_option("--out", out_path, "Output scene JSON")->required();
  gen_scene->callback([&] {
    const auto cfg = resolve_config(config);
    exit_code = fail(bisdf_generate_scene(objects, views, seed.value_or(0),
                                          cfg.empty() ? nullptr : cfg.c_str(),
                                          out_path.c_str()));
  });

  // render
  auto* render =
      app.add_subcommand("render", "Render depth, masks and observations");
  std::string scene_path, render_dir;
  render->add_option("--scene", scene_path, "Scene JSON")->required();
  render->add_option("--out", render_dir, "Output directory")->required();
  render->callback([&] {
    const auto cfg = resolve_config(config);
    exit_code = fail(bisdf_render(scene_path.c_str(), render_dir.c_str(),
                                  cfg.empty() ? nullptr : cfg.c_str()));
  });

  // init
  auto* init = app.add_subcommand(
      "init", "Ellipsoid-based pose initialization from masks");
  std::string weights_in, estimates_path;
  init->add_option("--weights", weights_in, "Weights file")->required();
  init->add_option("--scene", scene_path, "Scene JSON")->required();
  init->add_option("--render", render_dir, "Render directory")->required();
  init->add_option("--out", estimates_path, "Output estimates JSON")
      ->required();
  init->callback([&] {
    ModelHandle h;
    exit_code = h.load(weights_in);
    if (exit_code == 0)
      exit_code = fail(bisdf_init_poses(h.model, scene_path.c_str(),
                                        render_dir.c_str(),
                                        estimates_path.c_str()));
  });

  // optimize
  auto* optimize =
      app.add_subcommand("optimize", "Joint pose and shape refinement");
  std::string estimates_in;
  optimize->add_option("--weights", weights_in, "Weights file")->required();
  optimize->add_option("--scene", scene_path, "Scene JSON")->required();
  optimize->add_option("--render", render_dir, "Render directory")
      ->required();
  optimize->add_option("--estimates", estimates_in, "Initial estimates")
      ->required();
  optimize->add_option("--out", estimates_path, "Output estimates JSON")
      ->required();
  optimize->callback([&] {
    ModelHandle h;
    exit_code = h.load(weights_in);
    if (exit_code == 0) {
      const auto cfg = with_seed(resolve_config(config), seed);
      exit_code = fail(bisdf_optimize(h.model, scene_path.c_str(),
                                      render_dir.c_str(), estimates_in.c_str(),
                                      estimates_path.c_str(),
                                      cfg.empty() ? nullptr : cfg.c_str()));
    }
  });

  // mesh
  auto* mesh_cmd =
      app.add_subcommand("mesh", "Decode estimates into world-frame meshes");
  int resolution = 48;
  std::string mesh_dir;
  mesh_cmd->add_option("--weights", weights_in, "Weights file")->required();
  mesh_cmd->add_option("--estimates", estimates_in, "Estimates JSON")
      ->required();
  mesh_cmd->add_option("--out", mesh_dir, "Output directory")->required();
  mesh_cmd->add_option("--resolution", resolution, "Grid samples per axis");
  mesh_cmd->callback([&] {
    ModelHandle h;
    exit_code = h.load(weights_in);
    if (exit_code == 0)
      exit_code = fail(bisdf_mesh(h.model, estimates_in.c_str(),
                                  mesh_dir.c_str(), resolution));
  });

  // eval
  auto* eval_cmd =
      app.add_subcommand("eval", "Score estimates against the ground truth");
  std::string csv_path;
  eval_cmd->add_option("--weights", weights_in, "Weights file")->required();
  eval_cmd->add_option("--scene", scene_path, "Scene JSON")->required();
  eval_cmd->add_option("--estimates", estimates_in, "Estimates JSON")
      ->required();
  eval_cmd->add_option("--out", csv_path, "Output CSV")->required();
  eval_cmd->callback([&] {
    ModelHandle h;
    exit_code = h.load(weights_in);
    if (exit_code == 0)
      exit_code = fail(bisdf_evaluate(h.model, scene_path.c_str(),
                                      estimates_in.c_str(), csv_path.c_str()));
  });

  // pipeline
  auto* pipeline_cmd = app.add_subcommand(
      "pipeline", "render + init + optimize + mesh in one run");
  std::string out_dir;
  pipeline_cmd->add_option("--weights", weights_in, "Weights file")
      ->required();
  pipeline_cmd->add_option("--scene", scene_path, "Scene JSON")->required();
  pipeline_cmd->add_option("--out", out_dir, "Output directory")->required();
  pipeline_cmd->callback([&] {
    ModelHandle h;
    exit_code = h.load(weights_in);
    if (exit_code == 0) {
      const auto cfg = with_seed(resolve_config(config), seed);
      exit_code = fail(bisdf_run_pipeline(h.model, scene_path.c_str(),
                                          out_dir.c_str(),
                                          cfg.empty() ? nullptr : cfg.c_str()));
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors (including --help's 0)
  }
  return exit_code;
}
