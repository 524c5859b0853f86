#ifndef TRAJINT_H
#define TRAJINT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Lane id meaning "no lane".
 */
#define TRAJINT_NO_LANE INT64_MIN

typedef enum {
  TRAJINT_STATUS_OK = 0,
  TRAJINT_STATUS_NULL_POINTER = 1,
  TRAJINT_STATUS_INVALID_INPUT = 2,
  TRAJINT_STATUS_SHAPE = 3,
  TRAJINT_STATUS_DEGENERATE = 4,
  TRAJINT_STATUS_PARSE = 5,
  TRAJINT_STATUS_INVARIANT = 6,
  TRAJINT_STATUS_BUFFER_TOO_SMALL = 7,
  TRAJINT_STATUS_PANIC = 8,
} TrajintStatus;

typedef enum {
  TRAJINT_VARIANT_A = 0,
  TRAJINT_VARIANT_B = 1,
  TRAJINT_VARIANT_AB = 2,
} TrajintVariant;

typedef enum {
  TRAJINT_SELECTION_MODE_ALL = 0,
  TRAJINT_SELECTION_MODE_CURRENT = 1,
} TrajintSelectionMode;

typedef struct TrajintEncoder TrajintEncoder;

typedef struct TrajintLaneGraph TrajintLaneGraph;

typedef struct TrajintScene TrajintScene;

typedef struct {
  double x;
  double y;
  double vx;
  double vy;
  double ax;
  double ay;
} TrajintCaState;

typedef struct {
  double horizon;
  double epsilon;
  TrajintVariant variant;
} TrajintCoefficients;

typedef struct {
  double tau;
  double tau_clamped;
  double current_distance;
  double closest_distance;
  double value;
} TrajintCloseness;

/**
 * One agent at one timestep. Lanes use [`TRAJINT_NO_LANE`] for "none".
 */
typedef struct {
  uint64_t id;
  double x;
  double y;
  double heading;
  double vx;
  double vy;
  double ax;
  double ay;
  int64_t current_lane;
  int64_t future_lane;
} TrajintAgent;

/**
 * Selected neighbour per category, in the order SL, FL, FF, ML.
 */
typedef struct {
  uint64_t ids[4];
  bool present[4];
} TrajintNeighbors;

typedef struct {
  double min_ade;
  double min_fde;
} TrajintMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *trajint_last_error(void);

/**
 * Time of closest approach between two constant-acceleration agents, the
 * same time clamped to `[0, horizon]`, and the distance at the clamped time.
 *
 * # Safety
 * `target` and `other` must be valid for reads; the out pointers must be
 * valid for writes.
 */
TrajintStatus trajint_closest_approach(const TrajintCaState *target,
                                       const TrajintCaState *other,
                                       double horizon,
                                       double *tau_out,
                                       double *tau_clamped_out,
                                       double *distance_out);

/**
 * Closeness index of `other` with respect to `target`.
 *
 * # Safety
 * All pointers must be valid; `out` must be valid for writes.
 */
TrajintStatus trajint_closeness(const TrajintCaState *target,
                                const TrajintCaState *other,
                                const TrajintCoefficients *coefficients,
                                TrajintCloseness *out);

/**
 * Picks up to four neighbours of `agents[0]` within `threshold`.
 *
 * # Safety
 * `agents` must point to `n_agents` readable elements; `out` must be valid
 * for writes.
 */
TrajintStatus trajint_select_neighbors(const TrajintAgent *agents,
                                       size_t n_agents,
                                       double threshold,
                                       TrajintNeighbors *out);

/**
 * Parses a lane graph from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for writes.
 * The returned handle must be released with [`trajint_lane_graph_free`].
 */
TrajintStatus trajint_lane_graph_from_json(const char *json, TrajintLaneGraph **out);

/**
 * # Safety
 * `graph` must be null or a handle from [`trajint_lane_graph_from_json`]
 * that has not been freed.
 */
void trajint_lane_graph_free(TrajintLaneGraph *graph);

/**
 * Lane containing the point, or [`TRAJINT_NO_LANE`].
 *
 * # Safety
 * `graph` must be a live handle; `lane_out` must be valid for writes.
 */
TrajintStatus trajint_lane_graph_map_point(const TrajintLaneGraph *graph,
                                           double x,
                                           double y,
                                           int64_t *lane_out);

/**
 * Empty scene sampled every `dt` seconds.
 *
 * # Safety
 * `out` must be valid for writes. The handle must be released with
 * [`trajint_scene_free`].
 */
TrajintStatus trajint_scene_new(double dt, TrajintScene **out);

/**
 * # Safety
 * `scene` must be null or a live handle from [`trajint_scene_new`].
 */
void trajint_scene_free(TrajintScene *scene);

/**
 * Appends a frame; the target must be `agents[0]` in every frame and
 * timesteps must increase.
 *
 * # Safety
 * `scene` must be a live handle; `agents` must point to `n_agents` elements.
 */
TrajintStatus trajint_scene_push_frame(TrajintScene *scene,
                                       int64_t timestep,
                                       const TrajintAgent *agents,
                                       size_t n_agents);

/**
 * Replaces every lane assignment in the scene with the prediction of a
 * `rollout_steps`-step constant-acceleration rollout against `graph`.
 *
 * # Safety
 * Both handles must be live.
 */
TrajintStatus trajint_scene_annotate_lanes(TrajintScene *scene,
                                           const TrajintLaneGraph *graph,
                                           size_t rollout_steps);

/**
 * Number of frames in the scene.
 *
 * # Safety
 * `scene` must be a live handle.
 */
size_t trajint_scene_len(const TrajintScene *scene);

/**
 * Attention weights as a row-major `4 x frames` matrix (rows SL, FL, FF, ML).
 *
 * # Safety
 * `scene` and `coefficients` must be valid; `out` must hold `out_len` doubles.
 */
TrajintStatus trajint_scene_attention(const TrajintScene *scene,
                                      double threshold,
                                      TrajintSelectionMode mode,
                                      const TrajintCoefficients *coefficients,
                                      double *out,
                                      size_t out_len);

/**
 * Encoder with seeded random weights.
 *
 * # Safety
 * `out` must be valid for writes. Release with [`trajint_encoder_free`].
 */
TrajintStatus trajint_encoder_seeded(uint64_t seed, TrajintEncoder **out);

/**
 * Encoder from serialized weights.
 *
 * # Safety
 * `json` must be NUL-terminated; `out` must be valid for writes.
 */
TrajintStatus trajint_encoder_from_json(const char *json, TrajintEncoder **out);

/**
 * # Safety
 * `encoder` must be null or a live encoder handle.
 */
void trajint_encoder_free(TrajintEncoder *encoder);

/**
 * Width of one embedding row, or 0 for a null handle.
 *
 * # Safety
 * `encoder` must be null or a live handle.
 */
size_t trajint_encoder_model_dim(const TrajintEncoder *encoder);

/**
 * Interaction embedding as a row-major `frames x model_dim` matrix.
 *
 * # Safety
 * Handles and `coefficients` must be valid; `out` must hold `out_len` doubles.
 */
TrajintStatus trajint_scene_encode(const TrajintScene *scene,
                                   const TrajintEncoder *encoder,
                                   double threshold,
                                   TrajintSelectionMode mode,
                                   const TrajintCoefficients *coefficients,
                                   double *out,
                                   size_t out_len);

/**
 * minADE and minFDE of one sample. `pred_xy` holds `modes x horizon` points
 * as interleaved x, y; `gt_xy` holds `horizon` points.
 *
 * # Safety
 * Buffers must hold the stated number of doubles; `out` must be writable.
 */
TrajintStatus trajint_metrics(const double *pred_xy,
                              const double *gt_xy,
                              size_t modes,
                              size_t horizon,
                              TrajintMetrics *out);

/**
 * Root mean squared error over `samples` single-mode predictions of
 * `horizon` points each, interleaved x, y.
 *
 * # Safety
 * Both buffers must hold `samples * horizon * 2` doubles; `out` must be writable.
 */
TrajintStatus trajint_rmse(const double *pred_xy,
                           const double *gt_xy,
                           size_t samples,
                           size_t horizon,
                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRAJINT_H */
