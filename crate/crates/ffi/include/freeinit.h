#ifndef FREEINIT_H
#define FREEINIT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum FiFilterFamily {
  FI_FILTER_FAMILY_IDEAL = 0,
  FI_FILTER_FAMILY_GAUSSIAN = 1,
  FI_FILTER_FAMILY_BUTTERWORTH = 2,
} FiFilterFamily;

typedef enum FiScheduleKind {
  FI_SCHEDULE_KIND_LINEAR = 0,
  FI_SCHEDULE_KIND_SCALED_LINEAR = 1,
} FiScheduleKind;

typedef enum FiStatus {
  FI_STATUS_OK = 0,
  FI_STATUS_NULL_POINTER = 1,
  FI_STATUS_INVALID_ARGUMENT = 2,
  FI_STATUS_SHAPE_MISMATCH = 3,
  FI_STATUS_IO = 4,
  FI_STATUS_FORMAT = 5,
  FI_STATUS_MISSING_ARTIFACT = 6,
  FI_STATUS_NON_FINITE = 7,
  FI_STATUS_BUFFER_TOO_SMALL = 8,
  FI_STATUS_PANIC = 9,
} FiStatus;

/**
 * Low-pass mask over a `(F, H, W)` frequency grid.
 */
typedef struct FiMask FiMask;

/**
 * A trained denoiser together with the schedule it was trained on.
 */
typedef struct FiModel FiModel;

typedef struct FiSchedule FiSchedule;

/**
 * A `(F, C, H, W)` float video tensor.
 */
typedef struct FiTensor FiTensor;

/**
 * FreeInit sampling settings. `class_label < 0` samples unconditionally.
 */
typedef struct FiSampleParams {
  size_t iterations;
  enum FiFilterFamily family;
  double d0;
  uint32_t order;
  size_t ddim_steps;
  bool coarse_to_fine;
  double guidance_weight;
  bool reuse_eps;
  bool noise_reinit;
  uint64_t seed;
  int64_t class_label;
} FiSampleParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *fi_last_error(void);

const char *fi_status_name(enum FiStatus status);

/**
 * Standard normal tensor drawn from the named substream of `seed`.
 *
 * # Safety
 * `stream` must be a valid C string or null (meaning `"eps"`); `out` must be
 * writable.
 */
enum FiStatus fi_tensor_gaussian(size_t frames,
                                 size_t channels,
                                 size_t height,
                                 size_t width,
                                 uint64_t seed,
                                 const char *stream,
                                 struct FiTensor **out);

/**
 * Copies `len` floats laid out as `(F, C, H, W)` into a new tensor.
 *
 * # Safety
 * `dims` must point to 4 values and `data` to `len` floats.
 */
enum FiStatus fi_tensor_from_data(const size_t *dims,
                                  const float *data,
                                  size_t len,
                                  struct FiTensor **out);

/**
 * # Safety
 * `path` must be a valid C string.
 */
enum FiStatus fi_tensor_load(const char *path, struct FiTensor **out);

/**
 * # Safety
 * `t` must be a live tensor handle and `path` a valid C string.
 */
enum FiStatus fi_tensor_save(const struct FiTensor *t, const char *path);

/**
 * Writes `(F, C, H, W)` into `dims`.
 *
 * # Safety
 * `dims` must have room for 4 values.
 */
enum FiStatus fi_tensor_shape(const struct FiTensor *t, size_t *dims);

/**
 * Copies the tensor values into `buf`, which must hold at least
 * `F * C * H * W` floats.
 *
 * # Safety
 * `buf` must be writable for `len` floats.
 */
enum FiStatus fi_tensor_copy_data(const struct FiTensor *t, float *buf, size_t len);

/**
 * # Safety
 * `t` must be null or a handle not freed before.
 */
void fi_tensor_free(struct FiTensor *t);

/**
 * # Safety
 * `out` must be writable.
 */
enum FiStatus fi_schedule_new(enum FiScheduleKind kind,
                              size_t steps,
                              double beta_start,
                              double beta_end,
                              struct FiSchedule **out);

/**
 * The scaled-linear 1000-step preset.
 *
 * # Safety
 * `out` must be writable.
 */
enum FiStatus fi_schedule_sd(struct FiSchedule **out);

/**
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum FiStatus fi_schedule_alpha_bar(const struct FiSchedule *s, size_t t, double *out);

/**
 * `sqrt(abar_t) z0 + sqrt(1 - abar_t) eps`.
 *
 * # Safety
 * All handles must be live and `out` writable.
 */
enum FiStatus fi_q_sample(const struct FiSchedule *s,
                          const struct FiTensor *z0,
                          size_t t,
                          const struct FiTensor *eps,
                          struct FiTensor **out);

/**
 * # Safety
 * `s` must be null or a handle not freed before.
 */
void fi_schedule_free(struct FiSchedule *s);

/**
 * # Safety
 * `out` must be writable.
 */
enum FiStatus fi_mask_new(enum FiFilterFamily family_,
                          double d0,
                          uint32_t order,
                          size_t frames,
                          size_t height,
                          size_t width,
                          struct FiMask **out);

/**
 * # Safety
 * `m` must be null or a handle not freed before.
 */
void fi_mask_free(struct FiMask *m);

/**
 * Low band of `z_t` plus the high band of `eta`.
 *
 * # Safety
 * All handles must be live and `out` writable.
 */
enum FiStatus fi_reinitialize_noise(const struct FiTensor *z_t,
                                    const struct FiTensor *eta,
                                    const struct FiMask *mask,
                                    struct FiTensor **out);

/**
 * # Safety
 * All handles must be live and `out` writable.
 */
enum FiStatus fi_low_pass(const struct FiTensor *x,
                          const struct FiMask *mask,
                          struct FiTensor **out);

/**
 * # Safety
 * All handles must be live and `out` writable.
 */
enum FiStatus fi_high_pass(const struct FiTensor *x,
                           const struct FiMask *mask,
                           struct FiTensor **out);

/**
 * Mean cosine similarity of consecutive mean-subtracted frames.
 *
 * # Safety
 * `v` must be live and `out` writable.
 */
enum FiStatus fi_temporal_consistency(const struct FiTensor *v, double *out);

/**
 * Loads a model directory written by `freeinit train`.
 *
 * # Safety
 * `dir` must be a valid C string and `out` writable.
 */
enum FiStatus fi_model_load(const char *dir, struct FiModel **out);

/**
 * Sample shape `(F, C, H, W)` of the model.
 *
 * # Safety
 * `dims` must have room for 4 values.
 */
enum FiStatus fi_model_shape(const struct FiModel *m, size_t *dims);

/**
 * # Safety
 * `m` must be null or a handle not freed before.
 */
void fi_model_free(struct FiModel *m);

/**
 * Default settings: 4 Gaussian refinements at `d0 = 0.25`, 25 DDIM steps,
 * guidance 7.5, unconditional.
 */
struct FiSampleParams fi_sample_params_default(void);

/**
 * Runs FreeInit and returns the clean sample of the last pass.
 *
 * # Safety
 * `m` and `params` must be live and `out` writable.
 */
enum FiStatus fi_freeinit_sample(const struct FiModel *m,
                                 const struct FiSampleParams *params,
                                 struct FiTensor **out);

/**
 * Writes the `n` coarse-to-fine DDIM budgets for `total_steps` into `buf`.
 *
 * # Safety
 * `buf` must be writable for `len` values.
 */
enum FiStatus fi_coarse_to_fine_steps(size_t total_steps, size_t n, size_t *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FREEINIT_H */
