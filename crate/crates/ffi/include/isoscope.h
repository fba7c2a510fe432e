#ifndef ISOSCOPE_H
#define ISOSCOPE_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IsoStatus {
  ISO_STATUS_OK = 0,
  ISO_STATUS_NULL_POINTER = 1,
  ISO_STATUS_INVALID_ARGUMENT = 2,
  ISO_STATUS_IO = 3,
  ISO_STATUS_FORMAT = 4,
  ISO_STATUS_CONFIG = 5,
  ISO_STATUS_SEED = 6,
  /**
   * An operation needs state that is not there yet, e.g. picking before a render.
   */
  ISO_STATUS_STATE = 7,
  ISO_STATUS_PANIC = 8,
} IsoStatus;

/**
 * Surface coloring used by [`iso_session_render`].
 */
typedef enum IsoMode {
  ISO_MODE_MONO = 0,
  ISO_MODE_SHALLOW = 1,
  ISO_MODE_DEEP = 2,
} IsoMode;

typedef enum IsoSeedTarget {
  ISO_SEED_TARGET_FOREGROUND = 0,
  ISO_SEED_TARGET_BACKGROUND = 1,
} IsoSeedTarget;

/**
 * Opaque rendering session bound to one volume.
 */
typedef struct IsoSession IsoSession;

/**
 * Opaque scalar volume.
 */
typedef struct IsoVolume IsoVolume;

typedef struct IsoCamera {
  double eye[3];
  double look_at[3];
  double up[3];
  double vfov_deg;
  uint32_t width;
  uint32_t height;
} IsoCamera;

typedef struct IsoSegmentResult {
  uint64_t node_count;
  uint64_t foreground_cells;
  uint64_t background_cells;
  double cut_weight;
  double solve_ms;
} IsoSegmentResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *iso_last_error_message(void);

/**
 * Loads a volume from `stem.raw` plus `stem.json`.
 *
 * # Safety
 * `stem` must be a NUL-terminated string; `out` must be writable.
 */
enum IsoStatus iso_volume_load(const char *stem, struct IsoVolume **out);

/**
 * Generates a synthetic phantom. `kind` is one of `sphere`, `two-spheres`,
 * `dumbbell`, `ramp`, `nested-spheres`, `shell-with-inclusions`. `params`
 * may be null with `n_params == 0` for the defaults.
 *
 * # Safety
 * `kind` must be NUL-terminated, `dims` must point to 3 values, `params` to
 * `n_params` values, and `out` must be writable.
 */
enum IsoStatus iso_volume_synthesize(const char *kind,
                                     const uintptr_t *dims,
                                     const double *params,
                                     uintptr_t n_params,
                                     struct IsoVolume **out);

/**
 * # Safety
 * `vol` must be a live handle and `out` must point to 3 writable values.
 */
enum IsoStatus iso_volume_dims(const struct IsoVolume *vol, uintptr_t *out);

/**
 * Trilinear sample at a world position.
 *
 * # Safety
 * `vol` must be a live handle and `out` writable.
 */
enum IsoStatus iso_volume_sample(const struct IsoVolume *vol,
                                 double x,
                                 double y,
                                 double z,
                                 double *out);

/**
 * # Safety
 * `vol` must be null or a handle not yet freed.
 */
void iso_volume_free(struct IsoVolume *vol);

/**
 * Creates a session rendering the `isovalue` surface of `vol` in mono mode
 * with a default orbit camera. The session keeps its own reference to the
 * volume, so `vol` may be freed afterwards.
 *
 * # Safety
 * `vol` must be a live handle and `out` writable.
 */
enum IsoStatus iso_session_new(const struct IsoVolume *vol,
                               double isovalue,
                               struct IsoSession **out);

/**
 * # Safety
 * `s` must be null or a handle not yet freed.
 */
void iso_session_free(struct IsoSession *s);

/**
 * # Safety
 * `s` must be a live handle and `cam` readable.
 */
enum IsoStatus iso_session_set_camera(struct IsoSession *s, const struct IsoCamera *cam);

/**
 * Sets the isovalue and transfer function from a JSON document. The JSON
 * `isovalue` field, when present, replaces the session isovalue.
 *
 * # Safety
 * `s` must be a live handle and `json` NUL-terminated.
 */
enum IsoStatus iso_session_set_transfer_function_json(struct IsoSession *s, const char *json);

/**
 * # Safety
 * `s` must be a live handle.
 */
enum IsoStatus iso_session_set_mode(struct IsoSession *s, enum IsoMode mode);

/**
 * Adds a peel window in pixel coordinates; overlapping windows stack.
 *
 * # Safety
 * `s` must be a live handle.
 */
enum IsoStatus iso_session_add_peel_window(struct IsoSession *s,
                                           int64_t x,
                                           int64_t y,
                                           int64_t w,
                                           int64_t h);

/**
 * Removes all peel windows and seeds.
 *
 * # Safety
 * `s` must be a live handle.
 */
enum IsoStatus iso_session_clear(struct IsoSession *s);

/**
 * Renders the current view into `rgba`, which must hold
 * `width * height * 4` bytes. Pixel (0, 0) is the top-left corner.
 *
 * # Safety
 * `s` must be a live handle and `rgba` writable for `len` bytes.
 */
enum IsoStatus iso_session_render(struct IsoSession *s, uint8_t *rgba, uintptr_t len);

/**
 * Adds the cells under the given pixels of the last render to a seed set.
 * `pixels` holds `n` (x, y) pairs; `added` receives the number of new seeds.
 *
 * # Safety
 * `s` must be a live handle, `pixels` readable for `2 * n` values and
 * `added` null or writable.
 */
enum IsoStatus iso_session_pick(struct IsoSession *s,
                                const uint32_t *pixels,
                                uintptr_t n,
                                enum IsoSeedTarget target,
                                uintptr_t *added);

/**
 * Splits the isosurface between the picked seed sets with a minimum cut.
 *
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum IsoStatus iso_session_segment(struct IsoSession *s, struct IsoSegmentResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ISOSCOPE_H */
