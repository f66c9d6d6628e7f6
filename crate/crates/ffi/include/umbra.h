#ifndef UMBRA_H
#define UMBRA_H

/* Generated by cbindgen from the umbra-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible `umbra_*` call.
typedef enum UmbraStatus {
  // The call succeeded.
  UMBRA_STATUS_OK = 0,
  // A required pointer argument was NULL.
  UMBRA_STATUS_NULL_POINTER = 1,
  // An argument was malformed (bad UTF-8, unknown enum value, bad range).
  UMBRA_STATUS_INVALID_ARGUMENT = 2,
  // A file could not be read or written.
  UMBRA_STATUS_IO = 3,
  // A file was read but is not valid JSON for its schema.
  UMBRA_STATUS_PARSE = 4,
  // Inputs parsed but violate a documented invariant.
  UMBRA_STATUS_VALIDATION = 5,
  // An unexpected internal failure (caught panic).
  UMBRA_STATUS_INTERNAL = 6,
} UmbraStatus;

// A loaded ground-truth dataset (opaque).
typedef struct UmbraDataset UmbraDataset;

// Matched shadow-object pairs produced by `umbra_match` (opaque).
typedef struct UmbraPaired UmbraPaired;

// A loaded prediction file (opaque).
typedef struct UmbraPredictions UmbraPredictions;

// An evaluation report produced by `umbra_soap_evaluate` (opaque).
typedef struct UmbraSoapReport UmbraSoapReport;

// Matcher settings, mirroring the library defaults when obtained from
// `umbra_match_config_default`.
typedef struct UmbraMatchConfig {
  // Candidate gate: pair when box distance < shadow height × this scale.
  double threshold_scale;
  // Reject matches whose merged-box/association IoU is <= this floor.
  double iou_floor;
  // 0 = geometric mean, 1 = minimum, 2 = association score.
  uint32_t score_mode;
} UmbraMatchConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the calling thread's most recent failed `umbra_*`
// call. Empty until a failure happens. The pointer stays valid until the
// next failed call on the same thread; do not free it.
const char *umbra_last_error_message(void);

// Library version as a static NUL-terminated string; do not free it.
const char *umbra_version(void);

// Loads a ground-truth dataset from a JSON file into `*out`.
//
// # Safety
// `path` must be a valid NUL-terminated string and `out` a valid pointer.
enum UmbraStatus umbra_dataset_load(const char *path, struct UmbraDataset **out);

// Frees a dataset handle. NULL is a no-op.
//
// # Safety
// `dataset` must be NULL or a pointer obtained from `umbra_dataset_load`.
void umbra_dataset_free(struct UmbraDataset *dataset);

// Number of images in the dataset; 0 if `dataset` is NULL.
//
// # Safety
// `dataset` must be NULL or a valid dataset handle.
size_t umbra_dataset_image_count(const struct UmbraDataset *dataset);

// Number of ground-truth pairs in the dataset; 0 if `dataset` is NULL.
//
// # Safety
// `dataset` must be NULL or a valid dataset handle.
size_t umbra_dataset_pair_count(const struct UmbraDataset *dataset);

// Loads a prediction file (instances + associations) into `*out`.
//
// # Safety
// `path` must be a valid NUL-terminated string and `out` a valid pointer.
enum UmbraStatus umbra_predictions_load(const char *path, struct UmbraPredictions **out);

// Frees a predictions handle. NULL is a no-op.
//
// # Safety
// `predictions` must be NULL or a pointer from `umbra_predictions_load`.
void umbra_predictions_free(struct UmbraPredictions *predictions);

// Number of instance detections; 0 if `predictions` is NULL.
//
// # Safety
// `predictions` must be NULL or a valid predictions handle.
size_t umbra_predictions_instance_count(const struct UmbraPredictions *predictions);

// Number of association detections; 0 if `predictions` is NULL.
//
// # Safety
// `predictions` must be NULL or a valid predictions handle.
size_t umbra_predictions_association_count(const struct UmbraPredictions *predictions);

// The library's default matcher settings.
struct UmbraMatchConfig umbra_match_config_default(void);

// Pairs shadow and object detections and matches them to associations,
// storing the matched set in `*out`.
//
// `config` may be NULL for library defaults.
//
// # Safety
// All pointers must be NULL or valid; `predictions` and `out` are required.
enum UmbraStatus umbra_match(const struct UmbraPredictions *predictions,
                             const struct UmbraMatchConfig *config,
                             struct UmbraPaired **out);

// Frees a matched-pairs handle. NULL is a no-op.
//
// # Safety
// `paired` must be NULL or a pointer obtained from `umbra_match`.
void umbra_paired_free(struct UmbraPaired *paired);

// Number of matched pairs; 0 if `paired` is NULL.
//
// # Safety
// `paired` must be NULL or a valid matched-pairs handle.
size_t umbra_paired_len(const struct UmbraPaired *paired);

// Scores matched pairs against ground truth, storing a report in `*out`.
//
// `variant` selects the overlap measure: 0 = boxes, 1 = masks. `taus` may
// be NULL with `tau_count` 0 to use the standard 0.50..0.95 grid;
// otherwise it must point to `tau_count` strictly increasing thresholds in
// (0, 1).
//
// # Safety
// Handles must be valid; `taus` must be NULL or point to `tau_count`
// doubles; `out` must be a valid pointer.
enum UmbraStatus umbra_soap_evaluate(const struct UmbraPaired *paired,
                                     const struct UmbraDataset *dataset,
                                     uint32_t variant,
                                     const double *taus,
                                     size_t tau_count,
                                     struct UmbraSoapReport **out);

// Frees a report handle. NULL is a no-op.
//
// # Safety
// `report` must be NULL or a pointer obtained from `umbra_soap_evaluate`.
void umbra_report_free(struct UmbraSoapReport *report);

// Mean AP over the report's threshold grid; NaN if `report` is NULL.
//
// # Safety
// `report` must be NULL or a valid report handle.
double umbra_report_soap(const struct UmbraSoapReport *report);

// AP at threshold 0.50; NaN if absent from the grid or `report` is NULL.
//
// # Safety
// `report` must be NULL or a valid report handle.
double umbra_report_soap_50(const struct UmbraSoapReport *report);

// AP at threshold 0.75; NaN if absent from the grid or `report` is NULL.
//
// # Safety
// `report` must be NULL or a valid report handle.
double umbra_report_soap_75(const struct UmbraSoapReport *report);

// Number of thresholds in the report's grid; 0 if `report` is NULL.
//
// # Safety
// `report` must be NULL or a valid report handle.
size_t umbra_report_tau_count(const struct UmbraSoapReport *report);

// Copies the threshold and AP at `index` into the out-pointers.
//
// # Safety
// `report` must be a valid report handle; out-pointers may be NULL to skip
// that value.
enum UmbraStatus umbra_report_tau_ap(const struct UmbraSoapReport *report,
                                     size_t index,
                                     double *out_tau,
                                     double *out_ap);

// Serializes the report as JSON into `*out` (free with
// `umbra_string_free`).
//
// # Safety
// `report` must be a valid report handle and `out` a valid pointer.
enum UmbraStatus umbra_report_to_json(const struct UmbraSoapReport *report, char **out);

// Frees a string returned by this library. NULL is a no-op.
//
// # Safety
// `text` must be NULL or a pointer obtained from `umbra_report_to_json`.
void umbra_string_free(char *text);

// Smooth-L1 penalty between two angles in radians. With `wrap` set, the
// difference is folded into (-pi, pi] first.
double umbra_light_loss(double predicted, double truth, bool wrap);

// Light direction implied by a shadow centroid and an object centroid
// (radians in (-pi, pi], y pointing down), stored in `*out_angle`.
//
// Fails with `UMBRA_STATUS_INVALID_ARGUMENT` when the centroids coincide.
//
// # Safety
// `out_angle` must be a valid pointer.
enum UmbraStatus umbra_ground_truth_angle(double shadow_x,
                                          double shadow_y,
                                          double object_x,
                                          double object_y,
                                          double *out_angle);

// Generates a synthetic scene set into `out_dir` (ground truth, perfect and
// noisy predictions, manifest).
//
// `spec_json` may be NULL for the default specification, or a JSON object
// with any subset of the specification's fields.
//
// # Safety
// Strings must be NULL or valid NUL-terminated UTF-8; `out_dir` is required.
enum UmbraStatus umbra_synth_generate(const char *spec_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UMBRA_H */
