#ifndef FIBERTRACE_H
#define FIBERTRACE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FtStatus {
  FT_STATUS_OK = 0,
  FT_STATUS_NULL_POINTER = 1,
  FT_STATUS_INVALID_ARGUMENT = 2,
  FT_STATUS_IO = 3,
  FT_STATUS_PARSE = 4,
  FT_STATUS_NOT_FOUND = 5,
  FT_STATUS_FAILED = 6,
  FT_STATUS_PANIC = 7,
} FtStatus;

typedef struct FtGraph FtGraph;

typedef struct FtProposals FtProposals;

typedef struct FtTruth FtTruth;

typedef struct FtVolume FtVolume;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread; empty if none.
 */
const char *ft_last_error(void);

/**
 * Step length `max(f·d / (1 + (p/2)·kappa), s_min)`.
 */
double ft_adaptive_step(double kappa, double f, double d, double p, double s_min);

/**
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
enum FtStatus ft_volume_read(const char *path, struct FtVolume **out);

/**
 * # Safety
 * `volume` must come from this library; `path` must be a valid C string.
 */
enum FtStatus ft_volume_write(const struct FtVolume *volume, const char *path);

/**
 * Writes the voxel dimensions `(nx, ny, nz)` into `dims`.
 *
 * # Safety
 * `dims` must point to 3 writable `size_t`.
 */
enum FtStatus ft_volume_dims(const struct FtVolume *volume, size_t *dims);

/**
 * # Safety
 * `volume` must come from this library or be null.
 */
void ft_volume_free(struct FtVolume *volume);

/**
 * Renders a phantom from a JSON spec.
 *
 * # Safety
 * `spec_json` must be a valid C string; outputs must be valid pointers.
 */
enum FtStatus ft_phantom_generate(const char *spec_json,
                                  struct FtVolume **out_volume,
                                  struct FtTruth **out_truth);

/**
 * # Safety
 * `truth` must come from this library or be null.
 */
void ft_truth_free(struct FtTruth *truth);

/**
 * Samples the ground truth into a graph with nodes about `spacing` µm apart.
 *
 * # Safety
 * Handles must come from this library; `out` must be a valid pointer.
 */
enum FtStatus ft_truth_graph(const struct FtTruth *truth,
                             double pitch,
                             double spacing,
                             struct FtGraph **out);

/**
 * Segmentation stage: scoring, thresholding, thinning, extraction.
 * `config_json` may be null for defaults. Raw volumes are min-max
 * normalized first.
 *
 * # Safety
 * Handles must come from this library; `out` must be a valid pointer.
 */
enum FtStatus ft_segment(const struct FtVolume *volume,
                         const char *config_json,
                         struct FtGraph **out);

/**
 * Connection stage. With a ground truth the agents use oracle steering,
 * otherwise centroid steering.
 *
 * # Safety
 * Handles must come from this library (`truth` may be null); outputs must
 * be valid pointers.
 */
enum FtStatus ft_connect(const struct FtGraph *graph,
                         const struct FtVolume *volume,
                         const struct FtTruth *truth,
                         const char *config_json,
                         struct FtGraph **out_graph,
                         struct FtProposals **out_proposals);

/**
 * # Safety
 * `dir` must be a valid C string; `out` a valid pointer.
 */
enum FtStatus ft_graph_load(const char *dir, struct FtGraph **out);

/**
 * # Safety
 * `graph` must come from this library; `dir` must be a valid C string.
 */
enum FtStatus ft_graph_save(const struct FtGraph *graph, const char *dir);

/**
 * Node, edge and connected-component counts. Any output may be null.
 *
 * # Safety
 * `graph` must come from this library; non-null outputs must be valid.
 */
enum FtStatus ft_graph_counts(const struct FtGraph *graph,
                              size_t *nodes,
                              size_t *edges,
                              size_t *components);

/**
 * Writes every component as SWC.
 *
 * # Safety
 * `graph` must come from this library; `path` must be a valid C string.
 */
enum FtStatus ft_graph_export_swc(const struct FtGraph *graph, const char *path);

/**
 * # Safety
 * `graph` must come from this library or be null.
 */
void ft_graph_free(struct FtGraph *graph);

/**
 * Skeleton recall, precision and F1 at tolerance `tol` µm.
 *
 * # Safety
 * Handles must come from this library; outputs must be valid pointers.
 */
enum FtStatus ft_skeleton_prf(const struct FtGraph *pred,
                              const struct FtGraph *truth,
                              double tol,
                              double *recall,
                              double *precision,
                              double *f1);

/**
 * # Safety
 * `proposals` must come from this library; `count` must be valid.
 */
enum FtStatus ft_proposals_count(const struct FtProposals *proposals, size_t *count);

/**
 * Writes the proposals as TSV.
 *
 * # Safety
 * `proposals` must come from this library; `path` must be a valid C string.
 */
enum FtStatus ft_proposals_write(const struct FtProposals *proposals, const char *path);

/**
 * # Safety
 * `proposals` must come from this library or be null.
 */
void ft_proposals_free(struct FtProposals *proposals);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FIBERTRACE_H */
