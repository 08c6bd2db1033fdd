#ifndef UDFGRID_H
#define UDFGRID_H

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

// Status codes. Zero is success.
typedef enum UdfStatus {
  UDF_STATUS_OK = 0,
  UDF_STATUS_NULL_POINTER = 1,
  UDF_STATUS_INVALID_ARGUMENT = 2,
  UDF_STATUS_EMPTY_INPUT = 3,
  UDF_STATUS_INSUFFICIENT_DATA = 4,
  UDF_STATUS_MISSING_DATA = 5,
  UDF_STATUS_OUT_OF_BOUNDS = 6,
  UDF_STATUS_CONTRACT = 7,
  UDF_STATUS_WRONG_KIND = 8,
  UDF_STATUS_PARSE = 9,
  UDF_STATUS_CONFIG = 10,
  UDF_STATUS_IO = 11,
  UDF_STATUS_PANIC = 12,
} UdfStatus;

// Point cloud handle.
typedef struct UdfCloud UdfCloud;

// Sparse distance-field grid handle.
typedef struct UdfGrid UdfGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread; empty if none. The
// pointer stays valid until the next failing call on this thread.
const char *udfgrid_last_error(void);

// Library version as a static NUL-terminated string.
const char *udfgrid_version(void);

// Build a cloud from `n` interleaved `x, y, z` triples.
//
// # Safety
// `xyz` must point to `3 * n` readable doubles; `out_cloud` must be writable.
enum UdfStatus udfgrid_cloud_from_xyz(const double *xyz, uintptr_t n, struct UdfCloud **out_cloud);

// # Safety
// `path` must be a NUL-terminated string; `out_cloud` must be writable.
enum UdfStatus udfgrid_cloud_read_ply(const char *path, struct UdfCloud **out_cloud);

// # Safety
// `cloud` must be a live handle; `path` a NUL-terminated string.
enum UdfStatus udfgrid_cloud_write_ply(const struct UdfCloud *cloud, const char *path, bool binary);

// Number of points; zero for a null handle.
//
// # Safety
// `cloud` must be null or a live handle.
uintptr_t udfgrid_cloud_len(const struct UdfCloud *cloud);

// Whether the cloud carries per-point normals.
//
// # Safety
// `cloud` must be null or a live handle.
bool udfgrid_cloud_has_normals(const struct UdfCloud *cloud);

// Copy positions as interleaved triples into `xyz`, which holds `capacity`
// doubles and must fit `3 * len`.
//
// # Safety
// `cloud` must be a live handle; `xyz` must point to `capacity` writable doubles.
enum UdfStatus udfgrid_cloud_positions(const struct UdfCloud *cloud,
                                       double *xyz,
                                       uintptr_t capacity);

// Estimate normals from `k` nearest neighbors, oriented toward the sensor
// origins when the cloud has them.
//
// # Safety
// `cloud` must be a live handle; `out_cloud` must be writable.
enum UdfStatus udfgrid_cloud_estimate_normals(const struct UdfCloud *cloud,
                                              uintptr_t k,
                                              struct UdfCloud **out_cloud);

// # Safety
// `cloud` must be null or a handle not yet freed.
void udfgrid_cloud_free(struct UdfCloud *cloud);

// Compute a grid of kind `kind` (codes 0 to 7). `sigma <= 0` selects twice the
// voxel size. With `origin` or `dims` null the grid spans the cloud's bounds
// padded by three voxels.
//
// # Safety
// `cloud` must be a live handle; `origin` and `dims` must each be null or point
// to three values; `out_grid` must be writable.
enum UdfStatus udfgrid_grid_compute(const struct UdfCloud *cloud,
                                    uint8_t kind,
                                    double voxel_size,
                                    double sigma,
                                    const double *origin,
                                    const uint32_t *dims,
                                    struct UdfGrid **out_grid);

// # Safety
// `path` must be a NUL-terminated string; `out_grid` must be writable.
enum UdfStatus udfgrid_grid_read(const char *path, struct UdfGrid **out_grid);

// # Safety
// `grid` must be a live handle; `path` a NUL-terminated string.
enum UdfStatus udfgrid_grid_write(const struct UdfGrid *grid, const char *path);

// Toggle the flip state in place.
//
// # Safety
// `grid` must be a live handle.
enum UdfStatus udfgrid_grid_flip(struct UdfGrid *grid);

// Number of stored voxels; zero for a null handle.
//
// # Safety
// `grid` must be null or a live handle.
uintptr_t udfgrid_grid_len(const struct UdfGrid *grid);

// Kind code (0 to 7); 255 for a null handle.
//
// # Safety
// `grid` must be null or a live handle.
uint8_t udfgrid_grid_kind(const struct UdfGrid *grid);

// # Safety
// `grid` must be null or a live handle.
bool udfgrid_grid_is_flipped(const struct UdfGrid *grid);

// Reported value at voxel `(i, j, k)` in voxel units. `*found` is false for
// voxels that are not stored, in which case `*value` is left untouched.
//
// # Safety
// `grid` must be a live handle; `value` and `found` must be writable.
enum UdfStatus udfgrid_grid_get(const struct UdfGrid *grid,
                                uint32_t i,
                                uint32_t j,
                                uint32_t k,
                                double *value,
                                bool *found);

// Extract surface points: zero crossings for signed kinds, projections for
// unsigned ones.
//
// # Safety
// `grid` must be a live handle; `out_cloud` must be writable.
enum UdfStatus udfgrid_grid_extract(const struct UdfGrid *grid, struct UdfCloud **out_cloud);

// # Safety
// `grid` must be null or a handle not yet freed.
void udfgrid_grid_free(struct UdfGrid *grid);

// Symmetric Chamfer distance in meters.
//
// # Safety
// `a` and `b` must be live handles; `out_distance` must be writable.
enum UdfStatus udfgrid_chamfer(const struct UdfCloud *a,
                               const struct UdfCloud *b,
                               double *out_distance);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UDFGRID_H */
