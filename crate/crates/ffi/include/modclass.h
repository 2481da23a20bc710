#ifndef MODCLASS_H
#define MODCLASS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result of every fallible call.
typedef enum modclass_status {
  MODCLASS_STATUS_OK = 0,
  MODCLASS_STATUS_NULL_POINTER = 1,
  MODCLASS_STATUS_INVALID_ARGUMENT = 2,
  MODCLASS_STATUS_DATA = 3,
  MODCLASS_STATUS_IO = 4,
  MODCLASS_STATUS_FORMAT = 5,
  MODCLASS_STATUS_UNSUPPORTED_VERSION = 6,
  MODCLASS_STATUS_NUMERIC = 7,
  MODCLASS_STATUS_BUFFER_TOO_SMALL = 8,
  MODCLASS_STATUS_PANIC = 9,
} modclass_status;

// Opaque spectrogram image (`height × width × channels`, row-major `f32`).
typedef struct modclass_image modclass_image;

// Opaque trained classifier.
typedef struct modclass_model modclass_model;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len`). Returns the full message length in bytes
// without the terminator; 0 means the last call succeeded.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t modclass_last_error(char *buf, size_t len);

// Number of samples of one synthesized waveform under default parameters.
size_t modclass_signal_len(void);

// Synthesizes one received SISO waveform of `scheme` (e.g. `"16QAM"`)
// under default parameters. A non-finite `snr_db` means no noise. Writes
// [`modclass_signal_len`] samples into `out`.
//
// # Safety
// `scheme` must be a NUL-terminated string; `out` must point to `out_len`
// writable doubles.
enum modclass_status modclass_synthesize(const char *scheme,
                                         double snr_db,
                                         uint64_t seed_value,
                                         double *out,
                                         size_t out_len);

// Renders `len` samples taken at `sample_rate_hz` into a jet-colored
// `target × target × 3` spectrogram with the default STFT settings.
//
// # Safety
// `samples` must point to `len` readable doubles and `out` to a writable
// handle slot.
enum modclass_status modclass_spectrogram(const double *samples,
                                          size_t len,
                                          double sample_rate_hz,
                                          size_t target,
                                          struct modclass_image **out);

// # Safety
// `image` must be a live handle; the out pointers may be null.
enum modclass_status modclass_image_shape(const struct modclass_image *image,
                                          size_t *height,
                                          size_t *width,
                                          size_t *channels);

// Copies the pixel values (row-major, channels last) into `out`.
//
// # Safety
// `image` must be a live handle and `out` point to `out_len` writable floats.
enum modclass_status modclass_image_data(const struct modclass_image *image,
                                         float *out,
                                         size_t out_len);

// # Safety
// `image` must be null or a handle not yet freed.
void modclass_image_free(struct modclass_image *image);

// Loads a `CNN1` model file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable handle slot.
enum modclass_status modclass_model_load(const char *path, struct modclass_model **out);

// Number of classes, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t modclass_model_num_classes(const struct modclass_model *model);

// Class probabilities for one image; writes `num_classes` doubles.
//
// # Safety
// Handles must be live and `probs` point to `probs_len` writable doubles.
enum modclass_status modclass_model_predict(const struct modclass_model *model,
                                            const struct modclass_image *image,
                                            double *probs,
                                            size_t probs_len);

// # Safety
// `model` must be null or a handle not yet freed.
void modclass_model_free(struct modclass_model *model);

// Fuses `count` per-antenna class indices. `n_out_of == 0` selects the
// plurality vote, otherwise the n-out-of rule. `*label` is set to the fused
// class, or -1 when no class reaches `n_out_of` votes.
//
// # Safety
// `labels` must point to `count` readable values and `label` be writable.
enum modclass_status modclass_fuse(const uint32_t *labels,
                                   size_t count,
                                   size_t n_out_of,
                                   uint64_t seed_value,
                                   int64_t *label);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MODCLASS_H */
