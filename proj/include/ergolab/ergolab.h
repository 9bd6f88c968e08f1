/* ergolab C API.
 *
 * Every function returning int returns an ergolab_status. On failure a
 * message is available from ergolab_last_error() on the calling thread.
 * Handles are opaque; each *_free accepts NULL.
 */
#ifndef ERGOLAB_H
#define ERGOLAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ERGOLAB_API __declspec(dllexport)
#else
#define ERGOLAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

enum ergolab_status {
  ERGOLAB_OK = 0,
  ERGOLAB_E_INVALID_ARGUMENT = 1,
  ERGOLAB_E_DOMAIN = 2,
  ERGOLAB_E_ONE_SIDED_LIMIT = 3,
  ERGOLAB_E_PARSE = 4,
  ERGOLAB_E_NOT_COVERED = 5,
  ERGOLAB_E_SINGULAR_HIT = 6,
  ERGOLAB_E_IO = 7,
  ERGOLAB_E_ORDER_MISMATCH = 8,
  ERGOLAB_E_INTERNAL = 99
};

typedef struct ergolab_map ergolab_map;
typedef struct ergolab_scheme ergolab_scheme;
typedef struct ergolab_operator ergolab_operator;
typedef struct ergolab_config ergolab_config;
typedef struct ergolab_run ergolab_run;

ERGOLAB_API const char* ergolab_version(void);
ERGOLAB_API const char* ergolab_last_error(void);
/* Worker count used when a call passes threads = 0; 0 restores the default. */
ERGOLAB_API void ergolab_set_default_threads(unsigned threads);

/* ---- maps ---- */

/* name: doubling, ulam or cusp; gamma is used by cusp only. */
ERGOLAB_API int ergolab_map_builtin(const char* name, double gamma, ergolab_map** out);
ERGOLAB_API int ergolab_map_from_text(const char* text, const char* source, ergolab_map** out);
ERGOLAB_API int ergolab_map_from_file(const char* path, ergolab_map** out);
ERGOLAB_API void ergolab_map_free(ergolab_map* map);
ERGOLAB_API const char* ergolab_map_name(const ergolab_map* map);
ERGOLAB_API int ergolab_map_eval(const ergolab_map* map, double x, double* y);
/* order 1 or 2; side +1 or -1. */
ERGOLAB_API int ergolab_map_derivative(const ergolab_map* map, double x, int order, int side, double* value);
ERGOLAB_API size_t ergolab_map_critical_count(const ergolab_map* map);
ERGOLAB_API int ergolab_map_critical(const ergolab_map* map, size_t index, double* location, int* side,
                                     double* order);

typedef struct {
  double value_min, value_max;
  double first_min, first_max;
  double second_min, second_max;
  int mismatch;
} ergolab_order_report;

ERGOLAB_API int ergolab_verify_order(const ergolab_map* map, size_t point, double delta, size_t samples,
                                     ergolab_order_report* out);

typedef struct {
  double kappa;
  double c_delta;
  double lambda;
  int inconclusive;
} ergolab_expansion_report;

ERGOLAB_API int ergolab_verify_expansion(const ergolab_map* map, double delta, size_t horizon, size_t orbits,
                                         uint64_t seed, ergolab_expansion_report* out);

/* ---- critical orbits ---- */

typedef struct {
  double c0;
  double C0;
  double residual;
  int success;
  int hypothesis_fails;
} ergolab_recurrence;

/* Writes n = 0..N into each non-NULL array (N + 1 entries). */
ERGOLAB_API int ergolab_critical_orbit(const ergolab_map* map, size_t point, size_t N, double* orbit,
                                       double* log_D, double* log_d, double* log_E, ergolab_recurrence* fit);

/* ---- inducing scheme ---- */

typedef struct {
  double delta;
  int q0;
  int tau_max;
  double refine_tol;
  double bind_factor;
  unsigned threads;
} ergolab_inducing_params;

typedef struct {
  size_t cells;
  double coverage;
  int max_tau;
  double truncated;
  double unresolved;
  double M_hat;
  double C_hat;
} ergolab_scheme_info;

typedef struct {
  double left, right;
  int tau, b, l0, crit, sign;
  double sup_inv, var_inv;
} ergolab_cell;

ERGOLAB_API void ergolab_inducing_defaults(ergolab_inducing_params* params);
ERGOLAB_API int ergolab_scheme_build(const ergolab_map* map, const ergolab_inducing_params* params,
                                     ergolab_scheme** out);
ERGOLAB_API void ergolab_scheme_free(ergolab_scheme* scheme);
ERGOLAB_API int ergolab_scheme_info_get(const ergolab_scheme* scheme, ergolab_scheme_info* out);
ERGOLAB_API int ergolab_scheme_cell(const ergolab_scheme* scheme, size_t index, ergolab_cell* out);
/* ERGOLAB_E_NOT_COVERED when y lies in discarded mass. */
ERGOLAB_API int ergolab_scheme_return_time(const ergolab_scheme* scheme, double y, int* tau);
ERGOLAB_API int ergolab_scheme_F_sums(const ergolab_scheme* scheme, double p, double* sup_sum, double* var_sum,
                                      double* tail_bound);
/* mu(tau > n) for n = 0..max_tau. With h == NULL the weights are Lebesgue
 * lengths; otherwise h is a density on k equal cells. *len receives
 * max_tau + 1; at most cap values are written. */
ERGOLAB_API int ergolab_scheme_tau_tail(const ergolab_scheme* scheme, const double* h, size_t k, double* tail,
                                        size_t cap, size_t* len);

/* ---- transfer operators ---- */

ERGOLAB_API int ergolab_operator_map(const ergolab_map* map, size_t k, ergolab_operator** out);
ERGOLAB_API int ergolab_operator_scheme(const ergolab_scheme* scheme, size_t k, ergolab_operator** out);
ERGOLAB_API void ergolab_operator_free(ergolab_operator* op);
ERGOLAB_API size_t ergolab_operator_size(const ergolab_operator* op);
ERGOLAB_API size_t ergolab_operator_nnz(const ergolab_operator* op);
/* Writes up to cap (row, col, value) triplets in row-major order. */
ERGOLAB_API int ergolab_operator_triplets(const ergolab_operator* op, size_t cap, size_t* rows, size_t* cols,
                                          double* values);

typedef struct {
  size_t iterations;
  double residual;
  int reducible;
  double inv_h_integral;
} ergolab_density_info;

/* h receives k values integrating to 1. */
ERGOLAB_API int ergolab_invariant_density(const ergolab_operator* op, double* h, ergolab_density_info* info);

typedef struct {
  double lambda1;
  double gamma_hat;
  int multiplicity;
  int peripheral;
  int non_mixing;
} ergolab_gap_info;

ERGOLAB_API int ergolab_spectral_gap(const ergolab_operator* op, int n_eigs, ergolab_gap_info* out);

typedef struct {
  double completeness;
  double truncation;
  int simple_at_one;
  double gamma_at_one;
} ergolab_renewal_info;

/* Renewal check on the induced operator of the scheme at grid size k.
 * sigma_min receives n_theta values, one per e^{i theta}. */
ERGOLAB_API int ergolab_renewal_check(const ergolab_scheme* scheme, size_t k, const double* theta, size_t n_theta,
                                      double* sigma_min, ergolab_renewal_info* out);

typedef struct {
  double residual;
  double phi_hat_norm;
  double koopman_residual;
  size_t terms;
  int converged;
} ergolab_gordin_info;

/* Induces observable - mean over the scheme and solves for the martingale part. */
ERGOLAB_API int ergolab_gordin(const ergolab_scheme* scheme, size_t k, const char* observable, double mean,
                               ergolab_gordin_info* out);

/* ---- statistics ---- */

typedef struct {
  size_t N;
  size_t n;
  size_t burn_in;
  uint64_t seed;
  unsigned threads;
} ergolab_ensemble;

typedef struct {
  double centering;
  double sigma2_gk;
  double sigma2_batch;
  double ks;
  double ks_pvalue;
  double ks_end, ks_max, ks_integral;
  int pass;
  int fclt_pass;
  int degenerate;
  int undefined_variance;
} ergolab_clt_result;

ERGOLAB_API void ergolab_ensemble_defaults(ergolab_ensemble* e);
/* observable: spec string such as "x", "cos2pi", "indicator 0 0.25". */
ERGOLAB_API int ergolab_clt(const ergolab_map* map, const ergolab_ensemble* e, const char* observable,
                            double threshold, ergolab_clt_result* out);

enum ergolab_correlation_method { ERGOLAB_CORR_MONTE_CARLO = 0, ERGOLAB_CORR_OPERATOR = 1 };

/* rho and stderr_ (may be NULL) receive n_max + 1 values. size is the window
 * per orbit for Monte Carlo and the grid size for the operator method. */
ERGOLAB_API int ergolab_correlation(const ergolab_map* map, const ergolab_ensemble* e, const char* v, const char* w,
                                    size_t n_max, int method, size_t size, double* rho, double* stderr_,
                                    double* noise_floor);

typedef struct {
  int kind; /* 0 exponential, 1 polynomial, 2 decay too fast, 3 insufficient */
  double rate;
  double r2;
  double exp_rate, exp_r2;
  double poly_beta, poly_r2;
  size_t usable;
} ergolab_decay_fit;

ERGOLAB_API int ergolab_fit_decay(const double* rho, size_t len, double noise_floor, size_t n0,
                                  ergolab_decay_fit* out);
/* value receives len entries. */
ERGOLAB_API int ergolab_envelope(const double* tau_tail, size_t tail_len, const double* rho, size_t len,
                                 double noise_floor, double q, double delta, double* value, double* C, int* below);

typedef struct {
  double exp_slope;
  double loglog_slope;
  int at_least_linear;
} ergolab_ld_info;

/* Tails of |sum (v - center)| >= epsilon n over the grid; arrays hold n_grid entries. */
ERGOLAB_API int ergolab_large_deviation(const ergolab_map* map, const ergolab_ensemble* e, const char* observable,
                                        double center, double epsilon, const size_t* grid, size_t n_grid,
                                        double* prob, size_t* count, double* upper, ergolab_ld_info* info);

/* ---- experiment runner ---- */

ERGOLAB_API int ergolab_config_load(const char* path, ergolab_config** out);
ERGOLAB_API int ergolab_config_parse(const char* text, const char* source, const char* base_dir,
                                     ergolab_config** out);
ERGOLAB_API void ergolab_config_free(ergolab_config* cfg);
ERGOLAB_API int ergolab_config_set_seed(ergolab_config* cfg, uint64_t seed);
ERGOLAB_API int ergolab_config_set_out_dir(ergolab_config* cfg, const char* dir);
ERGOLAB_API int ergolab_config_set_threads(ergolab_config* cfg, unsigned threads);
ERGOLAB_API const char* ergolab_config_out_dir(const ergolab_config* cfg);
ERGOLAB_API uint64_t ergolab_config_hash(const ergolab_config* cfg);

/* command: analyze-map, induce, spectrum or limits. A run that completes with
 * failed checks still returns ERGOLAB_OK; see ergolab_run_exit_code. */
ERGOLAB_API int ergolab_run_command(const ergolab_config* cfg, const char* command, ergolab_run** out);
ERGOLAB_API void ergolab_run_free(ergolab_run* run);
/* 0 success, 1 validation failure, 2 check failure, 3 warning only. */
ERGOLAB_API int ergolab_run_exit_code(const ergolab_run* run);
ERGOLAB_API size_t ergolab_run_file_count(const ergolab_run* run);
ERGOLAB_API const char* ergolab_run_file(const ergolab_run* run, size_t i);
ERGOLAB_API size_t ergolab_run_check_count(const ergolab_run* run);
ERGOLAB_API const char* ergolab_run_check_name(const ergolab_run* run, size_t i);
ERGOLAB_API int ergolab_run_check_pass(const ergolab_run* run, size_t i);
ERGOLAB_API const char* ergolab_run_check_detail(const ergolab_run* run, size_t i);
ERGOLAB_API size_t ergolab_run_message_count(const ergolab_run* run);
ERGOLAB_API const char* ergolab_run_message(const ergolab_run* run, size_t i);

#ifdef __cplusplus
}
#endif

#endif
