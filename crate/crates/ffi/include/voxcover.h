#ifndef VOXCOVER_H
#define VOXCOVER_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VoxStatus {
  VOX_STATUS_OK = 0,
  VOX_STATUS_NULL_POINTER = 1,
  VOX_STATUS_INVALID_ARGUMENT = 2,
  VOX_STATUS_IO = 3,
  VOX_STATUS_PARSE = 4,
  VOX_STATUS_MISMATCH = 5,
  VOX_STATUS_EMPTY_INPUT = 6,
  VOX_STATUS_DEGENERATE = 7,
  VOX_STATUS_TOO_LARGE = 8,
  VOX_STATUS_PANIC = 9,
} VoxStatus;

/**
 * Frame voxel sets under construction.
 */
typedef struct VoxCoverage VoxCoverage;

/**
 * Result of a coverage selection.
 */
typedef struct VoxSelection VoxSelection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Owned by the
 * library and valid until the next call on the same thread.
 */
const char *vox_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 */
void vox_string_free(char *s);

/**
 * Library version as a static NUL-terminated string.
 */
const char *vox_version(void);

/**
 * World point of pixel `(u, v)` at `depth`. `intrinsics` is
 * `[fx, fy, cx, cy]`, `extrinsics` a row-major camera-from-world 4x4.
 */
enum VoxStatus vox_unproject_pixel(double u,
                                   double v,
                                   double depth,
                                   const double *intrinsics,
                                   const double *extrinsics,
                                   double *out_xyz);

/**
 * Pixel coordinates and depth `[u, v, depth]` of a world point. Fails with
 * `InvalidArgument` when the point is not in front of the camera.
 */
enum VoxStatus vox_project_point(const double *xyz,
                                 const double *intrinsics,
                                 const double *extrinsics,
                                 double *out_uvd);

struct VoxCoverage *vox_coverage_new(void);

void vox_coverage_free(struct VoxCoverage *handle);

/**
 * Adds one frame given `n_voxels` voxel coordinates as packed `x, y, z`
 * triples.
 */
enum VoxStatus vox_coverage_add_frame(struct VoxCoverage *handle,
                                      uint32_t frame_id,
                                      const uint32_t *voxels_xyz,
                                      size_t n_voxels);

/**
 * Greedy maximum-coverage selection of `k` frames.
 */
enum VoxStatus vox_coverage_greedy(const struct VoxCoverage *handle,
                                   size_t k,
                                   struct VoxSelection **out);

/**
 * Optimal selection by enumeration; fails with `TooLarge` for big instances.
 */
enum VoxStatus vox_coverage_exhaustive(const struct VoxCoverage *handle,
                                       size_t k,
                                       struct VoxSelection **out);

void vox_selection_free(struct VoxSelection *sel);

/**
 * Number of selected frames (0 for null).
 */
size_t vox_selection_len(const struct VoxSelection *sel);

/**
 * Union size of the selected frames (0 for null).
 */
size_t vox_selection_covered(const struct VoxSelection *sel);

bool vox_selection_early_stop(const struct VoxSelection *sel);

/**
 * Copies up to `capacity` selected ids (in selection order) and their
 * per-step gains into the given buffers. Either buffer may be null.
 * Returns the number of entries available.
 */
size_t vox_selection_copy(const struct VoxSelection *sel,
                          uint32_t *ids,
                          size_t *gains,
                          size_t capacity);

/**
 * Mean relative accuracy with the default thresholds.
 */
enum VoxStatus vox_mra_reward(double pred, double gt, double *out);

/**
 * Normalized edit-distance similarity with unit substitution cost.
 */
enum VoxStatus vox_verbal_reward(const char *pred, const char *gt, double *out);

enum VoxStatus vox_mc_reward(const char *pred, const char *gt, double *out);

/**
 * 1 when `raw` is a well-formed think/answer output, else 0.
 */
enum VoxStatus vox_format_reward(const char *raw, double *out);

/**
 * Weighted format + task reward. `kind`: 0 multiple choice, 1 numerical,
 * 2 verbal. `config_json` may be null for defaults.
 */
enum VoxStatus vox_composite_reward(const char *raw,
                                    const char *gt,
                                    uint32_t kind,
                                    const char *config_json,
                                    double *out);

/**
 * Group-normalized advantages of `n` rewards written to `out` (length `n`).
 */
enum VoxStatus vox_group_advantages(const double *rewards_in, size_t n, double *out);

/**
 * Scores prediction JSONL against ground-truth JSONL. Writes the report
 * JSON to `*out` (free with `vox_string_free`).
 */
enum VoxStatus vox_score_json(const char *pred_jsonl,
                              const char *gt_jsonl,
                              const char *config_json,
                              char **out);

/**
 * Generates QA pairs for one scene. `tasks` is a comma-separated list or
 * null for all tasks. Writes JSONL to `*out`.
 */
enum VoxStatus vox_qagen_json(const char *scene_json,
                              const char *tasks,
                              uint64_t seed,
                              const char *config_json,
                              char **out);

/**
 * Cold-start filtering of reward-record JSONL at quantile `q`. Writes the
 * result JSON to `*out`.
 */
enum VoxStatus vox_coldstart_json(const char *records_jsonl, double q, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VOXCOVER_H */
