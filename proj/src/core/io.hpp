#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "core/lie.hpp"
#include "core/optim.hpp"
#include "core/quadric.hpp"
#include "core/scene.hpp"
#include "core/trainer.hpp"

namespace bisdf::io {

using nlohmann::json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Grayscale PFM ("Pf"), 32-bit little-endian floats, rows bottom-up.
void write_pfm(const scene::DepthMap& depth, const std::string& path);
scene::DepthMap read_pfm(const std::string& path);

// Binary PGM ("P5"), 8-bit, 0 or 255.
void write_pgm(const scene::Mask& mask, const std::string& path);
scene::Mask read_pgm(const std::string& path);

// Row-major 16-element array.
json sim3_to_json(const lie::Sim3Transform& T);
lie::Sim3Transform sim3_from_json(const json& j);

// Lower-triangle vech, 10 elements.
json quadric_to_json(const quadric::DualQuadric& q);
quadric::DualQuadric quadric_from_json(const json& j);

json scene_to_json(const scene::SceneSpec& spec);
scene::SceneSpec scene_from_json(const json& j);
void save_scene(const scene::SceneSpec& spec, const std::string& path);
scene::SceneSpec load_scene(const std::string& path);

// Newline-delimited records {"x":[..], "d":.., "k":view, "p":[col,row]}.
void save_observations(const std::vector<scene::LabeledPoint>& pts,
                       const std::string& path);
std::vector<scene::LabeledPoint> load_observations(const std::string& path);

// Per-object estimates with convergence info.
void save_estimates(const std::vector<optim::ObjectEstimate>& estimates,
                    const std::string& path);
std::vector<optim::ObjectEstimate> load_estimates(const std::string& path);

// One JSON header line, then little-endian float64 blocks per instance.
void save_corpus(const std::vector<trainer::TrainingInstance>& corpus,
                 const std::string& path);
std::vector<trainer::TrainingInstance> load_corpus(const std::string& path);

}  // namespace bisdf::io
