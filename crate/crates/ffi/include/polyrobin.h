#ifndef POLYROBIN_H
#define POLYROBIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum PolyrobinStatus {
  POLYROBIN_STATUS_OK = 0,
  // A required pointer was null.
  POLYROBIN_STATUS_NULL_POINTER = 1,
  // Bad argument, size mismatch or unreadable config.
  POLYROBIN_STATUS_INVALID_ARGUMENT = 2,
  // Robin coefficients or the exponent failed validation.
  POLYROBIN_STATUS_VALIDATION = 3,
  // Condition estimate or residual above the limit.
  POLYROBIN_STATUS_ILL_CONDITIONED = 4,
  // Evaluation point outside or too close to the boundary.
  POLYROBIN_STATUS_EVAL_POINT = 5,
  // Mesh generation or validation failed.
  POLYROBIN_STATUS_MESH = 6,
  // A Rust panic was caught at the boundary.
  POLYROBIN_STATUS_INTERNAL = 7,
} PolyrobinStatus;

typedef struct PolyrobinMesh PolyrobinMesh;

typedef struct PolyrobinProblem PolyrobinProblem;

typedef struct PolyrobinSolution PolyrobinSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated, truncated
// to `len - 1` bytes) and returns the full message length in bytes.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t polyrobin_last_error(char *buf, size_t len);

// Icosphere of the given radius; refinement `r` has `20 * 4^r` panels.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum PolyrobinStatus polyrobin_mesh_sphere(double radius,
                                           uint32_t refinement,
                                           struct PolyrobinMesh **out);

// Axis-aligned cube centred at the origin; refinement `r` has `12 * 4^r` panels.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum PolyrobinStatus polyrobin_mesh_cube(double side,
                                         uint32_t refinement,
                                         struct PolyrobinMesh **out);

// Triangle mesh from an OFF file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer to a handle slot.
enum PolyrobinStatus polyrobin_mesh_load(const char *path, struct PolyrobinMesh **out);

// Number of panels, 0 for a null handle.
//
// # Safety
// `mesh` must be null or a live mesh handle.
size_t polyrobin_mesh_panel_count(const struct PolyrobinMesh *mesh);

// Panel centroids, `3 * N` values.
//
// # Safety
// `mesh` must be a live handle and `out` point to `len` writable doubles.
enum PolyrobinStatus polyrobin_mesh_centroids(const struct PolyrobinMesh *mesh,
                                              double *out,
                                              size_t len);

// Outward unit normals, `3 * N` values.
//
// # Safety
// `mesh` must be a live handle and `out` point to `len` writable doubles.
enum PolyrobinStatus polyrobin_mesh_normals(const struct PolyrobinMesh *mesh,
                                            double *out,
                                            size_t len);

// # Safety
// `mesh` must be null or a handle not yet freed.
void polyrobin_mesh_free(struct PolyrobinMesh *mesh);

// Problem of order `m` on a copy of `mesh`: `b` and `h` hold `m * N` values each, `p`
// is the data exponent.
//
// # Safety
// `mesh` must be a live handle, `b` and `h` point to `m * N` doubles, `out` be valid.
enum PolyrobinStatus polyrobin_problem_new(const struct PolyrobinMesh *mesh,
                                           size_t m,
                                           const double *b,
                                           const double *h,
                                           double p,
                                           struct PolyrobinProblem **out);

// Problem from a JSON config file (same format as the command-line tool).
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer to a handle slot.
enum PolyrobinStatus polyrobin_problem_from_config(const char *path, struct PolyrobinProblem **out);

// Order `m`, 0 for a null handle.
//
// # Safety
// `problem` must be null or a live problem handle.
size_t polyrobin_problem_order(const struct PolyrobinProblem *problem);

// # Safety
// `problem` must be null or a handle not yet freed.
void polyrobin_problem_free(struct PolyrobinProblem *problem);

// Validates and solves.
//
// # Safety
// `problem` must be a live handle and `out` a valid pointer to a handle slot.
enum PolyrobinStatus polyrobin_solve(const struct PolyrobinProblem *problem,
                                     struct PolyrobinSolution **out);

// `Δ^k u` and its gradient at `x` (3 doubles); `grad` may be null.
//
// # Safety
// `solution` must be a live handle, `x` point to 3 doubles, `value` be writable and
// `grad` null or point to 3 writable doubles.
enum PolyrobinStatus polyrobin_solution_evaluate(const struct PolyrobinSolution *solution,
                                                 const double *x,
                                                 size_t k,
                                                 double *value,
                                                 double *grad);

// Density `h̃_level`, `N` values.
//
// # Safety
// `solution` must be a live handle and `out` point to `len` writable doubles.
enum PolyrobinStatus polyrobin_solution_density(const struct PolyrobinSolution *solution,
                                                size_t level,
                                                double *out,
                                                size_t len);

// Relative residual of each level system, `m` values.
//
// # Safety
// `solution` must be a live handle and `out` point to `len` writable doubles.
enum PolyrobinStatus polyrobin_solution_residuals(const struct PolyrobinSolution *solution,
                                                  double *out,
                                                  size_t len);

// Condition estimate of each level system, `m` values.
//
// # Safety
// `solution` must be a live handle and `out` point to `len` writable doubles.
enum PolyrobinStatus polyrobin_solution_condition(const struct PolyrobinSolution *solution,
                                                  double *out,
                                                  size_t len);

// # Safety
// `solution` must be null or a handle not yet freed.
void polyrobin_solution_free(struct PolyrobinSolution *solution);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLYROBIN_H */
