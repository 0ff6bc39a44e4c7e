#ifndef PHYID_H
#define PHYID_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PhyidStatus {
  PHYID_STATUS_OK = 0,
  PHYID_STATUS_NULL_POINTER = 1,
  PHYID_STATUS_INVALID_UTF8 = 2,
  PHYID_STATUS_INVALID_ARGUMENT = 3,
  PHYID_STATUS_IO = 4,
  PHYID_STATUS_MALFORMED = 5,
  PHYID_STATUS_INVALID_EVENT = 6,
  PHYID_STATUS_DIMENSION_MISMATCH = 7,
  PHYID_STATUS_SIGNAL_TOO_SHORT = 8,
  PHYID_STATUS_NON_FINITE_LOSS = 9,
  PHYID_STATUS_EMPTY = 10,
  PHYID_STATUS_MONOTONICITY = 11,
  PHYID_STATUS_JSON = 12,
  PHYID_STATUS_BUFFER_TOO_SMALL = 13,
  PHYID_STATUS_PANIC = 14,
} PhyidStatus;

// Opaque trained-model handle.
typedef struct PhyidBundle PhyidBundle;

typedef struct PhyidPrediction {
  double mass_kg;
  double v0_mps;
  double energy_j;
} PhyidPrediction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. Valid until the next
// call into this library on the same thread.
const char *phyid_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *phyid_version(void);

// Loads a bundle directory. On success `*out` owns a new handle.
//
// # Safety
// `dir` must be a NUL-terminated string and `out` a valid pointer.
enum PhyidStatus phyid_bundle_load(const char *dir, struct PhyidBundle **out);

// Releases a handle from `phyid_bundle_load`. Null is ignored.
//
// # Safety
// `bundle` must be null or a handle not yet freed.
void phyid_bundle_free(struct PhyidBundle *bundle);

// Number of raw features the bundle expects, or 0 for a null handle.
//
// # Safety
// `bundle` must be null or a live handle.
uintptr_t phyid_bundle_feature_count(const struct PhyidBundle *bundle);

// Predicts from `n` raw (unnormalized) feature values, ordered sensor by
// sensor with nine indicators each.
//
// # Safety
// `features` must point to `n` doubles and `out` be a valid pointer.
enum PhyidStatus phyid_bundle_predict_features(const struct PhyidBundle *bundle,
                                               const double *features,
                                               uintptr_t n,
                                               struct PhyidPrediction *out);

// Nine energy indicators of one waveform (RMS, TE, PA, EPR, PCR, WPF, PF,
// AME, AM) written to `out`, which must hold at least `out_len >= 9` doubles.
//
// # Safety
// `samples` must point to `n` doubles and `out` to `out_len` doubles.
enum PhyidStatus phyid_waveform_features(const double *samples,
                                         uintptr_t n,
                                         double sample_rate_hz,
                                         double *out,
                                         uintptr_t out_len);

// `0.5 * mass_kg * v0_mps^2`; mass must be positive and both finite.
//
// # Safety
// `out` must be a valid pointer.
enum PhyidStatus phyid_kinetic_energy(double mass_kg, double v0_mps, double *out);

// Generates a synthetic data set into `out_dir`. `config_json` may be null
// for the default configuration.
//
// # Safety
// Both arguments must be null or NUL-terminated strings; `out_dir` non-null.
enum PhyidStatus phyid_generate(const char *config_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHYID_H */
