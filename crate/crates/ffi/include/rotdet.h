#ifndef ROTDET_H
#define ROTDET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  RD_STATUS_OK = 0,
  RD_STATUS_NULL_POINTER = 1,
  RD_STATUS_INVALID_BOX = 2,
  RD_STATUS_INVALID_QUAD = 3,
  RD_STATUS_CONFIG = 4,
  RD_STATUS_SHAPE = 5,
  RD_STATUS_PARSE = 6,
  RD_STATUS_FORMAT = 7,
  RD_STATUS_TRUNCATED = 8,
  RD_STATUS_REFERENCE = 9,
  RD_STATUS_IO = 10,
  RD_STATUS_INVALID_ARGUMENT = 11,
  RD_STATUS_PANIC = 12,
} RdStatus;

/**
 * Opaque feature map (height x width x channels, row-major, channels last).
 */
typedef struct RdFeatureMap RdFeatureMap;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *rd_version(void);

/**
 * Message for the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next rotdet call on the same thread.
 */
const char *rd_last_error(void);

/**
 * IoU of two rotated boxes.
 *
 * # Safety
 * `a` and `b` point to 5 doubles; `out` to one writable double.
 */
RdStatus rd_rotated_iou(const double *a, const double *b, double *out);

/**
 * Row-major `n x m` IoU matrix between two box arrays.
 *
 * # Safety
 * `a` holds `5n` doubles, `b` holds `5m`, `out` has room for `n * m`.
 */
RdStatus rd_iou_matrix(const double *a, size_t n, const double *b, size_t m, double *out);

/**
 * Canonical form of each box, with `|theta| <= pi/4`. `out` may equal `boxes`.
 *
 * # Safety
 * `boxes` and `out` each hold `5n` doubles.
 */
RdStatus rd_normalize_angle(const double *boxes, size_t n, double *out);

/**
 * Greedy rotated NMS. Kept indices go to `keep` in descending score order
 * and their count to `keep_len`. `keep` needs room for `n` entries.
 *
 * # Safety
 * `boxes` holds `5n` doubles, `scores` and `class_ids` hold `n` entries,
 * `keep` has room for `n`, `keep_len` points to one writable size.
 */
RdStatus rd_nms(const double *boxes,
                const double *scores,
                const size_t *class_ids,
                size_t n,
                double iou_thresh,
                bool class_agnostic,
                size_t *keep,
                size_t *keep_len);

/**
 * # Safety
 * `anchors` and `targets` hold `4n` doubles; `out` has room for `4n`.
 */
RdStatus rd_encode_hdelta(const double *anchors, const double *targets, size_t n, double *out);

/**
 * # Safety
 * `anchors` and `deltas` hold `4n` doubles; `out` has room for `4n`.
 */
RdStatus rd_decode_hdelta(const double *anchors, const double *deltas, size_t n, double *out);

/**
 * # Safety
 * `hprops` holds `4n` doubles, `gts` holds `5n`; `out` has room for `4n`.
 */
RdStatus rd_encode_transform(const double *hprops, const double *gts, size_t n, double *out);

/**
 * # Safety
 * `hprops` and `params` hold `4n` doubles; `out` has room for `5n`.
 */
RdStatus rd_decode_transform(const double *hprops, const double *params, size_t n, double *out);

/**
 * # Safety
 * `props`, `gts` and `out` each hold `5n` doubles.
 */
RdStatus rd_encode_local(const double *props, const double *gts, size_t n, double *out);

/**
 * # Safety
 * `props`, `targets` and `out` each hold `5n` doubles.
 */
RdStatus rd_decode_local(const double *props, const double *targets, size_t n, double *out);

/**
 * New feature map. With `data` NULL the map is zero-filled; otherwise
 * `data` holds `height * width * channels` doubles and is copied.
 *
 * # Safety
 * `data` is NULL or valid for the stated length; `out` is writable.
 */
RdStatus rd_fmap_new(size_t height,
                     size_t width,
                     size_t channels,
                     const double *data,
                     RdFeatureMap **out);

/**
 * Releases a handle. NULL is ignored.
 *
 * # Safety
 * `f` is NULL or a handle from this library that has not been freed.
 */
void rd_fmap_free(RdFeatureMap *f);

/**
 * # Safety
 * `f` is a live handle; the three out-pointers are writable.
 */
RdStatus rd_fmap_shape(const RdFeatureMap *f, size_t *height, size_t *width, size_t *channels);

/**
 * Borrowed pointer to the map's `height * width * channels` values, valid
 * until the handle is freed. NULL for a NULL handle.
 *
 * # Safety
 * `f` is NULL or a live handle.
 */
const double *rd_fmap_data(const RdFeatureMap *f);

/**
 * Loads an FMAP file.
 *
 * # Safety
 * `path` is a NUL-terminated UTF-8 string; `out` is writable.
 */
RdStatus rd_fmap_read(const char *path, RdFeatureMap **out);

/**
 * Saves a map as an FMAP file (values narrowed to 32-bit floats).
 *
 * # Safety
 * `f` is a live handle; `path` is a NUL-terminated UTF-8 string.
 */
RdStatus rd_fmap_write(const RdFeatureMap *f, const char *path);

/**
 * Rotated RoI Align of one box (feature-map coordinates) into a new
 * `k x k x C` handle.
 *
 * # Safety
 * `f` is a live handle, `rbox_ptr` points to 5 doubles, `out` is writable.
 */
RdStatus rd_rroi_align(const RdFeatureMap *f,
                       const double *rbox_ptr,
                       size_t k,
                       size_t ks,
                       RdFeatureMap **out);

/**
 * Align over `n` boxes into a caller buffer of `n * k * k * C` doubles.
 *
 * # Safety
 * `f` is a live handle, `boxes` holds `5n` doubles and `out` has room for
 * `n * k * k * channels` doubles.
 */
RdStatus rd_rroi_align_batch(const RdFeatureMap *f,
                             const double *boxes,
                             size_t n,
                             size_t k,
                             size_t ks,
                             double *out);

/**
 * Row-max plus column-max pooling into a new handle.
 *
 * # Safety
 * `f` is a live handle; `out` is writable.
 */
RdStatus rd_center_pool(const RdFeatureMap *f, RdFeatureMap **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROTDET_H */
