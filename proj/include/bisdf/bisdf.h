/* C interface of the bisdf shared library.
 *
 * All heavy state lives behind the opaque bisdf_model handle. Stage
 * functions exchange data through files: corpora as binary-with-header,
 * scenes and estimates as JSON, depth as PFM, masks as PGM, observations as
 * newline-delimited JSON, meshes as PLY. Every function returns a status
 * code; bisdf_last_error() describes the most recent failure on the calling
 * thread.
 */
#ifndef BISDF_H
#define BISDF_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bisdf_status {
  BISDF_OK = 0,
  BISDF_ERROR_INVALID_ARGUMENT = 1,
  BISDF_ERROR_IO = 2,
  BISDF_ERROR_DEGENERATE_INPUT = 3,
  BISDF_ERROR_DIVERGED = 4,
  BISDF_ERROR_INTERNAL = 5
} bisdf_status;

/* Message for the last failing call on this thread; never NULL. */
const char* bisdf_last_error(void);

/* Library version as "major.minor.patch". */
const char* bisdf_version(void);

/* Writes a deterministic training corpus (shape family samples with signed
 * distance labels) to out_path. */
bisdf_status bisdf_generate_corpus(int n_instances, uint64_t seed,
                                   const char* out_path);

/* Trains the bi-level decoder on a corpus file. Writes the weights file and,
 * when loss_csv_path is non-NULL, a per-epoch loss trace (epoch, coarse,
 * fine, kl). config_json may override training parameters (epochs,
 * learning_rate, seed, ...); pass NULL for defaults. */
bisdf_status bisdf_train(const char* corpus_path, const char* weights_path,
                         const char* loss_csv_path, const char* config_json);

/* Writes a random scene description (objects with ground-truth poses,
 * cameras, intrinsics) as JSON. config_json may override intrinsics and the
 * noise model. */
bisdf_status bisdf_generate_scene(int n_objects, int n_views, uint64_t seed,
                                  const char* config_json,
                                  const char* out_scene_json);

/* Renders a scene: depth_<view>.pfm, mask_<view>_<object>.pgm and
 * obs_<object>.ndjson files in out_dir. config_json may set eps and
 * max_pixels for the observation sampling. */
bisdf_status bisdf_render(const char* scene_json, const char* out_dir,
                          const char* config_json);

typedef struct bisdf_model bisdf_model;

bisdf_status bisdf_model_load(const char* weights_path, bisdf_model** out);
void bisdf_model_free(bisdf_model* model);
int bisdf_model_latent_dim(const bisdf_model* model);

/* Ellipsoid-based pose initialization from the rendered masks. Writes
 * per-object estimates JSON. */
bisdf_status bisdf_init_poses(bisdf_model* model, const char* scene_json,
                              const char* render_dir,
                              const char* out_estimates_json);

/* Joint pose and shape refinement of the estimates against the sampled
 * observations. config_json may override optimizer parameters. */
bisdf_status bisdf_optimize(bisdf_model* model, const char* scene_json,
                            const char* render_dir,
                            const char* estimates_json,
                            const char* out_estimates_json,
                            const char* config_json);

/* Decodes each estimate into a world-frame mesh_<object>.ply in out_dir. */
bisdf_status bisdf_mesh(bisdf_model* model, const char* estimates_json,
                        const char* out_dir, int resolution);

/* Compares estimates against the scene ground truth and writes a CSV with
 * pose errors, accuracy flag, fitting rate and bounding-box IoU. */
bisdf_status bisdf_evaluate(bisdf_model* model, const char* scene_json,
                            const char* estimates_json, const char* out_csv);

/* render + init + optimize + mesh in one call, writing all artifacts to
 * out_dir. config_json may override pipeline and optimizer parameters. */
bisdf_status bisdf_run_pipeline(bisdf_model* model, const char* scene_json,
                                const char* out_dir, const char* config_json);

#ifdef __cplusplus
}
#endif

#endif /* BISDF_H */
