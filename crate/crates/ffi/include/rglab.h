#ifndef RGLAB_H
#define RGLAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RglabStatus {
  RGLAB_STATUS_OK = 0,
  RGLAB_STATUS_NULL_POINTER = 1,
  RGLAB_STATUS_INVALID_ARGUMENT = 2,
  RGLAB_STATUS_INVALID_MODEL = 3,
  RGLAB_STATUS_SHAPE = 4,
  RGLAB_STATUS_NUMERICAL = 5,
  RGLAB_STATUS_IO = 6,
  RGLAB_STATUS_PANIC = 7,
} RglabStatus;

typedef enum RglabShift {
  // `A / (n alpha)`.
  RGLAB_SHIFT_ADJACENCY = 0,
  // `D^{-1/2} A D^{-1/2}`.
  RGLAB_SHIFT_LAPLACIAN = 1,
} RglabShift;

// Sampled graph with its latent positions.
typedef struct RglabGraph RglabGraph;

// Latent-position kernel model.
typedef struct RglabModel RglabModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty if none.
// The pointer stays valid until the next failing call on the same thread.
const char *rglab_last_error(void);

// Block model with `k` communities: `c` is `k × k`, `p` has `k` entries.
//
// # Safety
// `c` and `p` must point to `k * k` and `k` readable doubles.
enum RglabStatus rglab_model_sbm(uintptr_t k,
                                 const double *c,
                                 const double *p,
                                 struct RglabModel **out);

// Gaussian kernel on `[-1, 1]` with the given bandwidth.
//
// # Safety
// `out` must be a writable pointer.
enum RglabStatus rglab_model_gaussian(double bandwidth, struct RglabModel **out);

// # Safety
// `model` must come from a constructor above and not be freed twice.
void rglab_model_free(struct RglabModel *model);

// The `q` largest limit-operator eigenvalues, descending.
//
// # Safety
// `model` must be live and `out` must hold `q` doubles.
enum RglabStatus rglab_limit_eigenvalues(const struct RglabModel *model,
                                         enum RglabShift shift,
                                         uintptr_t q,
                                         double *out);

// Samples an `n`-node graph with edge probabilities `alpha · w(x_i, x_j)`.
//
// # Safety
// `model` must be live and `out` writable.
enum RglabStatus rglab_graph_sample(const struct RglabModel *model,
                                    uintptr_t n,
                                    double alpha,
                                    uint64_t seed,
                                    struct RglabGraph **out);

// # Safety
// `graph` must come from [`rglab_graph_sample`] and not be freed twice.
void rglab_graph_free(struct RglabGraph *graph);

// Node count and undirected edge count.
//
// # Safety
// `graph` must be live; null out-pointers are skipped.
enum RglabStatus rglab_graph_size(const struct RglabGraph *graph,
                                  uintptr_t *nodes,
                                  uintptr_t *edges);

// Copies the `n × n` shift matrix into `out` (`len` doubles available).
//
// # Safety
// `graph` must be live and `out` must hold `len` doubles.
enum RglabStatus rglab_graph_shift(const struct RglabGraph *graph,
                                   enum RglabShift shift,
                                   double *out,
                                   uintptr_t len);

// The `q` leading eigenpairs of the shift matrix: `values` gets `q` doubles,
// `vectors` gets `n × q` (column `i` is eigenvector `i`, unit norm). `vectors` may be null.
//
// # Safety
// `graph` must be live and the buffers sized as described.
enum RglabStatus rglab_graph_eigenpairs(const struct RglabGraph *graph,
                                        enum RglabShift shift,
                                        uintptr_t q,
                                        double *values,
                                        double *vectors);

// Library version as a static NUL-terminated string.
const char *rglab_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RGLAB_H */
