#ifndef MCG_MCG_H
#define MCG_MCG_H

/* C interface to the manifold-constrained Gaussian library.
 *
 * Matrices cross the boundary as dense row-major double arrays. Every call
 * that can fail returns an mcg_status; on failure the message is available
 * from mcg_last_error() on the calling thread until the next failing call.
 * Handles are opaque and owned by the caller, who releases them with the
 * matching *_destroy function (passing NULL is allowed). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(MCG_BUILDING_LIBRARY)
#    define MCG_API __declspec(dllexport)
#  else
#    define MCG_API __declspec(dllimport)
#  endif
#else
#  define MCG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mcg_status {
  MCG_OK = 0,
  MCG_ERR_DIMENSION_MISMATCH = 1,
  MCG_ERR_NOT_PSD = 2,
  MCG_ERR_RANK_DEFICIENT = 3,
  MCG_ERR_SINGULAR = 4,
  MCG_ERR_INVALID_ARGUMENT = 5,
  MCG_ERR_OFF_MANIFOLD = 6,
  MCG_ERR_OUTSIDE_CHART = 7,
  MCG_ERR_NON_FINITE = 8,
  MCG_ERR_IO = 9,
  MCG_ERR_INTERNAL = 10
} mcg_status;

/* Stable identifier such as "rank_deficient". Never NULL. */
MCG_API const char* mcg_status_string(mcg_status status);
/* Message of the last failure on this thread ("" if none). */
MCG_API const char* mcg_last_error(void);
MCG_API const char* mcg_version(void);

/* ---- Gaussians --------------------------------------------------------- */

typedef struct mcg_gaussian mcg_gaussian;

/* mean: n values, cov: n*n row-major. The covariance is symmetrized and must
 * be positive semidefinite; it may be singular. */
MCG_API mcg_status mcg_gaussian_create(size_t n, const double* mean, const double* cov,
                                       mcg_gaussian** out);
MCG_API void mcg_gaussian_destroy(mcg_gaussian* g);
MCG_API size_t mcg_gaussian_dim(const mcg_gaussian* g);
MCG_API size_t mcg_gaussian_rank(const mcg_gaussian* g);
/* out: n values. */
MCG_API mcg_status mcg_gaussian_mean(const mcg_gaussian* g, double* out);
/* out: n*n row-major. */
MCG_API mcg_status mcg_gaussian_cov(const mcg_gaussian* g, double* out);
/* out: count*n row-major, one sample per row. */
MCG_API mcg_status mcg_gaussian_sample(const mcg_gaussian* g, size_t count, uint64_t seed,
                                       double* out);

/* ---- Linear manifolds {x : S^T x = c} --------------------------------- */

typedef struct mcg_linear_manifold mcg_linear_manifold;

/* S: n*m row-major with full column rank m < n, c: m values. */
MCG_API mcg_status mcg_linear_manifold_create(size_t n, size_t m, const double* S,
                                              const double* c, mcg_linear_manifold** out);
MCG_API void mcg_linear_manifold_destroy(mcg_linear_manifold* manifold);
MCG_API size_t mcg_linear_manifold_ambient_dim(const mcg_linear_manifold* manifold);
MCG_API size_t mcg_linear_manifold_constraint_count(const mcg_linear_manifold* manifold);
/* Orthogonal projection of x (n values) onto the manifold. */
MCG_API mcg_status mcg_linear_manifold_project(const mcg_linear_manifold* manifold,
                                               const double* x, double* out);
/* out: n*n row-major projector Pi. */
MCG_API mcg_status mcg_linear_manifold_projector(const mcg_linear_manifold* manifold,
                                                 double* out);

/* Results are new handles owned by the caller. */
MCG_API mcg_status mcg_marginalize(const mcg_gaussian* g, const mcg_linear_manifold* manifold,
                                   mcg_gaussian** out);
/* Requires a full-rank covariance. */
MCG_API mcg_status mcg_condition(const mcg_gaussian* g, const mcg_linear_manifold* manifold,
                                 mcg_gaussian** out);
/* Conditioning from information-form data: info n*n row-major, S n*m
 * row-major, mean n values, c m values. */
MCG_API mcg_status mcg_condition_via_kkt(size_t n, size_t m, const double* info, const double* S,
                                         const double* mean, const double* c, mcg_gaussian** out);
/* Axis-aligned forms: the first n_alpha coordinates are free, the remaining
 * ones are fixed to beta (n - n_alpha values). */
MCG_API mcg_status mcg_axis_marginalize(const mcg_gaussian* g, size_t n_alpha, const double* beta,
                                        mcg_gaussian** out);
MCG_API mcg_status mcg_axis_condition(const mcg_gaussian* g, size_t n_alpha, const double* beta,
                                      mcg_gaussian** out);

/* ---- Projected normal experiment -------------------------------------- */

typedef enum mcg_reference_method {
  MCG_REFERENCE_ANALYTICAL = 0,
  MCG_REFERENCE_MONTE_CARLO = 1
} mcg_reference_method;

typedef struct mcg_projnorm_config {
  double mean[2];
  const double* scales; /* covariance = scale * I, one row per entry */
  size_t scale_count;
  size_t grid_size;
  mcg_reference_method reference;
  size_t mc_samples;
  uint64_t seed;
  double ratio_floor;
} mcg_projnorm_config;

typedef struct mcg_projnorm_result mcg_projnorm_result;

/* Fills defaults. scales points at static storage owned by the library. */
MCG_API void mcg_projnorm_config_default(mcg_projnorm_config* config);
MCG_API mcg_status mcg_projnorm_run(const mcg_projnorm_config* config, mcg_projnorm_result** out);
MCG_API void mcg_projnorm_result_destroy(mcg_projnorm_result* result);
MCG_API size_t mcg_projnorm_row_count(const mcg_projnorm_result* result);
MCG_API size_t mcg_projnorm_grid_size(const mcg_projnorm_result* result);
/* Scalars of one row; any output pointer may be NULL. */
MCG_API mcg_status mcg_projnorm_row(const mcg_projnorm_result* result, size_t row, double* scale,
                                    double* det_sigma, double* kl);
/* theta, reference and approx each receive grid_size values; any may be NULL. */
MCG_API mcg_status mcg_projnorm_curves(const mcg_projnorm_result* result, size_t row,
                                       double* theta, double* reference, double* approx);
MCG_API int mcg_projnorm_kl_increasing(const mcg_projnorm_result* result);
MCG_API int mcg_projnorm_ratio_floor_met(const mcg_projnorm_result* result);

/* ---- Planar pushing ---------------------------------------------------- */

typedef struct mcg_push_config {
  size_t timesteps;
  double dt;
  double box_width;
  double box_height;
  double probe_radius;
  double probe_start[2];
  double probe_velocity[2];
  double heading_amplitude;
  double offset_amplitude;
  double edge_margin;
  double odometry_sigma[3];
  double contact_sigma;
  double prior_sigma;
  double noise_multiplier;
  int draw_noise;
} mcg_push_config;

typedef struct mcg_push_sweep mcg_push_sweep;

MCG_API void mcg_push_config_default(mcg_push_config* config);
/* threads = 0 uses the hardware concurrency. */
MCG_API mcg_status mcg_push_sweep_run(const mcg_push_config* config, const double* multipliers,
                                      size_t level_count, size_t trials_per_level, uint64_t seed,
                                      unsigned threads, mcg_push_sweep** out);
MCG_API void mcg_push_sweep_destroy(mcg_push_sweep* sweep);
MCG_API size_t mcg_push_sweep_level_count(const mcg_push_sweep* sweep);
MCG_API double mcg_push_sweep_multiplier(const mcg_push_sweep* sweep, size_t level);
/* Trials that produced a result; failed trials are omitted. */
MCG_API size_t mcg_push_sweep_trial_count(const mcg_push_sweep* sweep, size_t level);
MCG_API size_t mcg_push_sweep_failed_count(const mcg_push_sweep* sweep, size_t level);
MCG_API mcg_status mcg_push_sweep_trial(const mcg_push_sweep* sweep, size_t level, size_t index,
                                        size_t* trial, double* d_maha, int* converged);
/* Single trial; any output pointer may be NULL. */
MCG_API mcg_status mcg_push_run_trial(const mcg_push_config* config, uint64_t seed,
                                      double* d_maha, int* converged, size_t* iterations);
/* JSON dump of the generated scenario; release with mcg_string_free. */
MCG_API mcg_status mcg_push_scenario_json(const mcg_push_config* config, uint64_t seed,
                                          char** out);
MCG_API void mcg_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* MCG_MCG_H */
