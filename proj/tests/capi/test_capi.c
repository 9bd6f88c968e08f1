/* Exercises the C API from plain C. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "ergolab/ergolab.h"

static int failures = 0;

#define EXPECT(cond)                                                   \
  do {                                                                 \
    if (!(cond)) {                                                     \
      fprintf(stderr, "%s:%d: expectation failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                      \
    }                                                                  \
  } while (0)

static void test_maps(void) {
  ergolab_map* m = NULL;
  double y = 0, d = 0, loc = 0, ord = 0;
  int side = 0;
  EXPECT(ergolab_map_builtin("ulam", 0.75, &m) == ERGOLAB_OK);
  EXPECT(strcmp(ergolab_map_name(m), "ulam") == 0);
  EXPECT(ergolab_map_eval(m, 0.25, &y) == ERGOLAB_OK && fabs(y - 0.75) < 1e-15);
  EXPECT(ergolab_map_eval(m, 1.5, &y) == ERGOLAB_E_DOMAIN);
  EXPECT(strlen(ergolab_last_error()) > 0);
  EXPECT(ergolab_map_derivative(m, 0.5, 1, 1, &d) == ERGOLAB_E_ONE_SIDED_LIMIT);
  EXPECT(ergolab_map_critical_count(m) == 2);
  EXPECT(ergolab_map_critical(m, 0, &loc, &side, &ord) == ERGOLAB_OK && loc == 0.5 && ord == 2.0);
  EXPECT(ergolab_map_critical(m, 5, &loc, &side, &ord) == ERGOLAB_E_INVALID_ARGUMENT);

  ergolab_order_report rep;
  EXPECT(ergolab_verify_order(m, 0, 0.01, 100, &rep) == ERGOLAB_OK && rep.mismatch == 0);

  double logD[11], logE[11];
  ergolab_recurrence fit;
  EXPECT(ergolab_critical_orbit(m, 0, 10, NULL, logD, NULL, logE, &fit) == ERGOLAB_OK);
  EXPECT(fabs(logD[10] - 10 * log(4.0)) < 1e-9);
  EXPECT(fabs(fit.c0 - log(4.0) / 3) < 0.01 * log(4.0) / 3);
  ergolab_map_free(m);

  ergolab_map* bad = NULL;
  EXPECT(ergolab_map_builtin("henon", 0.75, &bad) != ERGOLAB_OK && bad == NULL);
  EXPECT(ergolab_map_from_text("schema_version = 1\nname = t\nbranch = 0 1 poly 0 1 oops\n", "t.map", &bad) ==
         ERGOLAB_E_PARSE);
  ergolab_map_free(NULL);
}

static void test_operators(void) {
  ergolab_map* m = NULL;
  ergolab_operator* op = NULL;
  size_t rows[8], cols[8];
  double vals[8], h[64];
  ergolab_gap_info gap;
  ergolab_density_info info;
  EXPECT(ergolab_map_builtin("doubling", 0, &m) == ERGOLAB_OK);
  EXPECT(ergolab_operator_map(m, 2, &op) == ERGOLAB_OK);
  EXPECT(ergolab_operator_nnz(op) == 4);
  EXPECT(ergolab_operator_triplets(op, 8, rows, cols, vals) == ERGOLAB_OK);
  EXPECT(rows[1] == 0 && cols[1] == 1 && vals[1] == 0.5);
  ergolab_operator_free(op);
  EXPECT(ergolab_operator_map(m, 64, &op) == ERGOLAB_OK);
  EXPECT(ergolab_invariant_density(op, h, &info) == ERGOLAB_OK);
  EXPECT(fabs(h[17] - 1.0) < 1e-9);
  EXPECT(ergolab_spectral_gap(op, 6, &gap) == ERGOLAB_OK && gap.multiplicity == 1);
  ergolab_operator_free(op);
  ergolab_map_free(m);
}

static void test_scheme(void) {
  ergolab_map* m = NULL;
  ergolab_scheme* s = NULL;
  ergolab_inducing_params p;
  ergolab_scheme_info info;
  ergolab_cell cell;
  int tau = 0;
  size_t len = 0;
  double tail[64];
  EXPECT(ergolab_map_builtin("doubling", 0, &m) == ERGOLAB_OK);
  ergolab_inducing_defaults(&p);
  p.q0 = 5;
  EXPECT(ergolab_scheme_build(m, &p, &s) == ERGOLAB_OK);
  EXPECT(ergolab_scheme_info_get(s, &info) == ERGOLAB_OK && info.cells == 32);
  EXPECT(ergolab_scheme_cell(s, 3, &cell) == ERGOLAB_OK && cell.tau == 5);
  EXPECT(ergolab_scheme_cell(s, 99, &cell) == ERGOLAB_E_INVALID_ARGUMENT);
  EXPECT(ergolab_scheme_return_time(s, 0.3, &tau) == ERGOLAB_OK && tau == 5);
  EXPECT(ergolab_scheme_tau_tail(s, NULL, 0, tail, 64, &len) == ERGOLAB_OK && len == 6);
  EXPECT(fabs(tail[4] - 1.0) < 1e-12 && tail[5] == 0.0);
  ergolab_scheme_free(s);
  ergolab_map_free(m);
}

static void test_stats(void) {
  ergolab_map* m = NULL;
  ergolab_ensemble e;
  ergolab_clt_result r;
  ergolab_decay_fit fit;
  double rho[30];
  size_t grid[2] = {1, 10}, count[2];
  double prob[2];
  ergolab_ld_info ld;
  int i;
  EXPECT(ergolab_map_builtin("doubling", 0, &m) == ERGOLAB_OK);
  ergolab_ensemble_defaults(&e);
  e.N = 2000;
  e.n = 500;
  EXPECT(ergolab_clt(m, &e, "x", 0.1, &r) == ERGOLAB_OK);
  EXPECT(fabs(r.sigma2_gk - 0.25) < 0.03);
  EXPECT(r.ks >= 0 && r.ks <= 1);
  EXPECT(ergolab_clt(m, &e, "nonsense", 0.1, &r) == ERGOLAB_E_INVALID_ARGUMENT);

  for (i = 0; i < 30; ++i) rho[i] = exp(-0.7 * i);
  EXPECT(ergolab_fit_decay(rho, 30, 0.0, 0, &fit) == ERGOLAB_OK && fit.kind == 0);
  EXPECT(fabs(fit.rate - 0.7) < 1e-9);

  e.N = 5000;
  EXPECT(ergolab_large_deviation(m, &e, "x", 0.5, 0.6, grid, 2, prob, count, NULL, &ld) == ERGOLAB_OK);
  EXPECT(prob[0] == 0.0 && prob[1] == 0.0 && count[1] == 0);
  EXPECT(ergolab_large_deviation(m, &e, "x", 0.5, 0.0, grid, 2, prob, count, NULL, &ld) ==
         ERGOLAB_E_INVALID_ARGUMENT);
  ergolab_map_free(m);
}

static void test_runner(void) {
  ergolab_config* cfg = NULL;
  ergolab_run* run = NULL;
  const char* text = "schema_version = 1\n[map]\nbuiltin = doubling\n[inducing]\nq0 = 4\n";
  EXPECT(ergolab_config_parse("schema_version = 1\n[map]\nbogus = 1\n", "x.cfg", ".", &cfg) == ERGOLAB_E_PARSE);
  EXPECT(strstr(ergolab_last_error(), "x.cfg:3") != NULL);
  EXPECT(ergolab_config_parse(text, "t.cfg", ".", &cfg) == ERGOLAB_OK);
  EXPECT(ergolab_config_set_out_dir(cfg, "capi_test_out") == ERGOLAB_OK);
  EXPECT(ergolab_run_command(cfg, "dance", &run) == ERGOLAB_E_INVALID_ARGUMENT);
  EXPECT(ergolab_run_command(cfg, "induce", &run) == ERGOLAB_OK);
  EXPECT(ergolab_run_exit_code(run) == 0);
  EXPECT(ergolab_run_file_count(run) > 4);
  EXPECT(ergolab_run_check_count(run) >= 1);
  ergolab_run_free(run);
  ergolab_config_free(cfg);
}

int main(void) {
  EXPECT(strlen(ergolab_version()) > 0);
  test_maps();
  test_operators();
  test_scheme();
  test_stats();
  test_runner();
  if (failures) {
    fprintf(stderr, "%d failures\n", failures);
    return 1;
  }
  printf("capi: all checks passed\n");
  return 0;
}
