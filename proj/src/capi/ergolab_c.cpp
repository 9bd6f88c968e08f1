#include "ergolab/ergolab.h"

#include <cmath>
#include <complex>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "ergolab/critical_orbits.hpp"
#include "ergolab/error.hpp"
#include "ergolab/experiment.hpp"
#include "ergolab/inducing.hpp"
#include "ergolab/map_model.hpp"
#include "ergolab/observable.hpp"
#include "ergolab/parallel.hpp"
#include "ergolab/stats.hpp"
#include "ergolab/transfer.hpp"
#include "ergolab/version.hpp"

using namespace ergolab;

struct ergolab_map {
  PiecewiseMap map;
};
struct ergolab_scheme {
  InducedScheme scheme;
};
struct ergolab_operator {
  UlamOperator op;
};
struct ergolab_config {
  ExperimentConfig cfg;
};
struct ergolab_run {
  RunResult result;
};

namespace {

thread_local std::string g_error;

int set_error(int code, const std::string& msg) {
  g_error = msg;
  return code;
}

template <class F>
int guarded(F&& f) {
  try {
    g_error.clear();
    f();
    return ERGOLAB_OK;
  } catch (const Error& e) {
    return set_error(static_cast<int>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(ERGOLAB_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(ERGOLAB_E_INTERNAL, e.what());
  } catch (...) {
    return set_error(ERGOLAB_E_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) fail(ErrorCode::invalid_argument, what);
}

Ensemble to_ensemble(const ergolab_map* map, const ergolab_ensemble* e) {
  require(map && e, "null map or ensemble");
  Ensemble out{map->map};
  out.N = e->N;
  out.n = e->n;
  out.burn_in = e->burn_in;
  out.seed = e->seed;
  out.threads = e->threads;
  return out;
}

}  // namespace

extern "C" {

const char* ergolab_version(void) { return kVersion; }
const char* ergolab_last_error(void) { return g_error.c_str(); }
void ergolab_set_default_threads(unsigned threads) { set_default_threads(threads); }

// ---- maps

int ergolab_map_builtin(const char* name, double gamma, ergolab_map** out) {
  return guarded([&] {
    require(name && out, "null argument");
    BuiltinParams p;
    p.gamma = gamma;
    *out = new ergolab_map{builtin_map(name, p)};
  });
}

int ergolab_map_from_text(const char* text, const char* source, ergolab_map** out) {
  return guarded([&] {
    require(text && out, "null argument");
    *out = new ergolab_map{parse_map_text(text, source ? source : "<text>")};
  });
}

int ergolab_map_from_file(const char* path, ergolab_map** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new ergolab_map{load_map_file(path)};
  });
}

void ergolab_map_free(ergolab_map* map) { delete map; }

const char* ergolab_map_name(const ergolab_map* map) { return map ? map->map.name().c_str() : ""; }

int ergolab_map_eval(const ergolab_map* map, double x, double* y) {
  return guarded([&] {
    require(map && y, "null argument");
    *y = map->map.eval(x);
  });
}

int ergolab_map_derivative(const ergolab_map* map, double x, int order, int side, double* value) {
  return guarded([&] {
    require(map && value, "null argument");
    *value = map->map.derivative(x, order, side < 0 ? Side::minus : Side::plus);
  });
}

size_t ergolab_map_critical_count(const ergolab_map* map) { return map ? map->map.critical_set().size() : 0; }

int ergolab_map_critical(const ergolab_map* map, size_t index, double* location, int* side, double* order) {
  return guarded([&] {
    require(map && index < map->map.critical_set().size(), "critical point index out of range");
    const auto& c = map->map.critical_set()[index];
    if (location) *location = c.location;
    if (side) *side = c.side == Side::plus ? 1 : -1;
    if (order) *order = c.order;
  });
}

int ergolab_verify_order(const ergolab_map* map, size_t point, double delta, size_t samples,
                         ergolab_order_report* out) {
  return guarded([&] {
    require(map && out && point < map->map.critical_set().size(), "invalid argument");
    const OrderReport r = verify_order(map->map, map->map.critical_set()[point], delta, samples);
    *out = {r.value.min, r.value.max, r.first.min, r.first.max, r.second.min, r.second.max, r.mismatch ? 1 : 0};
    if (r.mismatch) g_error = r.diagnostic;
  });
}

int ergolab_verify_expansion(const ergolab_map* map, double delta, size_t horizon, size_t orbits, uint64_t seed,
                             ergolab_expansion_report* out) {
  return guarded([&] {
    require(map && out, "null argument");
    const ExpansionReport r = verify_expansion(map->map, delta, horizon, orbits, seed);
    *out = {r.kappa, r.c_delta, r.lambda, r.inconclusive ? 1 : 0};
  });
}

int ergolab_critical_orbit(const ergolab_map* map, size_t point, size_t N, double* orbit, double* log_D,
                           double* log_d, double* log_E, ergolab_recurrence* fit) {
  return guarded([&] {
    require(map && point < map->map.critical_set().size(), "invalid argument");
    const CriticalOrbitData d = orbit_data(map->map, map->map.critical_set()[point], N);
    auto copy = [N](const std::vector<double>& src, double* dst) {
      if (!dst) return;
      for (size_t n = 0; n <= N; ++n) dst[n] = n < src.size() ? src[n] : NAN;
    };
    copy(d.orbit, orbit);
    copy(d.log_D, log_D);
    copy(d.log_d, log_d);
    copy(d.log_E, log_E);
    if (fit) {
      const RecurrenceFit f = exp_recurrence_check(d);
      *fit = {f.c0, f.C0, f.residual, f.success ? 1 : 0, f.hypothesis_fails ? 1 : 0};
    }
  });
}

// ---- inducing

void ergolab_inducing_defaults(ergolab_inducing_params* p) {
  if (!p) return;
  const InducingParams d;
  *p = {d.delta, d.q0, d.tau_max, d.refine_tol, d.bind_factor, d.threads};
}

int ergolab_scheme_build(const ergolab_map* map, const ergolab_inducing_params* params, ergolab_scheme** out) {
  return guarded([&] {
    require(map && out, "null argument");
    InducingParams p;
    if (params) {
      p.delta = params->delta;
      p.q0 = params->q0;
      p.tau_max = params->tau_max;
      p.refine_tol = params->refine_tol;
      p.bind_factor = params->bind_factor;
      p.threads = params->threads;
    }
    *out = new ergolab_scheme{build_partition(map->map, p)};
  });
}

void ergolab_scheme_free(ergolab_scheme* s) { delete s; }

int ergolab_scheme_info_get(const ergolab_scheme* s, ergolab_scheme_info* out) {
  return guarded([&] {
    require(s && out, "null argument");
    const CellStatistics st = cell_statistics(s->scheme);
    *out = {s->scheme.cells().size(), s->scheme.coverage(), s->scheme.max_tau(),
            to_double(s->scheme.ledger().truncated), to_double(s->scheme.ledger().unresolved), st.M_hat, st.C_hat};
  });
}

int ergolab_scheme_cell(const ergolab_scheme* s, size_t i, ergolab_cell* out) {
  return guarded([&] {
    require(s && out && i < s->scheme.cells().size(), "cell index out of range");
    const Cell& c = s->scheme.cells()[i];
    *out = {c.left_d(), c.right_d(), c.tau, c.b, c.l0, c.crit, c.sign, c.sup_inv, c.var_inv};
  });
}

int ergolab_scheme_return_time(const ergolab_scheme* s, double y, int* tau) {
  return guarded([&] {
    require(s && tau, "null argument");
    *tau = s->scheme.return_time(y);
  });
}

int ergolab_scheme_F_sums(const ergolab_scheme* s, double p, double* sup_sum, double* var_sum, double* tail_bound) {
  return guarded([&] {
    require(s, "null scheme");
    const FConditionSums f = F_condition_sums(s->scheme, p);
    if (sup_sum) *sup_sum = f.sup_sum;
    if (var_sum) *var_sum = f.var_sum;
    if (tail_bound) *tail_bound = f.tail_bound;
  });
}

int ergolab_scheme_tau_tail(const ergolab_scheme* s, const double* h, size_t k, double* tail, size_t cap,
                            size_t* len) {
  return guarded([&] {
    require(s, "null scheme");
    TauTail t;
    if (h) {
      const std::vector<double> hv(h, h + k);
      t = tau_distribution(s->scheme, TauWeight::mu_Y, &hv);
    } else {
      t = tau_distribution(s->scheme, TauWeight::lebesgue);
    }
    if (len) *len = t.tail.size();
    for (size_t i = 0; tail && i < cap && i < t.tail.size(); ++i) tail[i] = t.tail[i];
  });
}

// ---- operators

int ergolab_operator_map(const ergolab_map* map, size_t k, ergolab_operator** out) {
  return guarded([&] {
    require(map && out && k > 0, "invalid argument");
    *out = new ergolab_operator{ulam_matrix(map->map, k)};
  });
}

int ergolab_operator_scheme(const ergolab_scheme* s, size_t k, ergolab_operator** out) {
  return guarded([&] {
    require(s && out && k > 0, "invalid argument");
    *out = new ergolab_operator{ulam_matrix(s->scheme, k)};
  });
}

void ergolab_operator_free(ergolab_operator* op) { delete op; }
size_t ergolab_operator_size(const ergolab_operator* op) { return op ? op->op.k : 0; }
size_t ergolab_operator_nnz(const ergolab_operator* op) {
  return op ? static_cast<size_t>(op->op.matrix.nonZeros()) : 0;
}

int ergolab_operator_triplets(const ergolab_operator* op, size_t cap, size_t* rows, size_t* cols, double* values) {
  return guarded([&] {
    require(op, "null operator");
    size_t i = 0;
    for (auto [r, c, v] : triplets(op->op.matrix)) {
      if (i >= cap) break;
      if (rows) rows[i] = r;
      if (cols) cols[i] = c;
      if (values) values[i] = v;
      ++i;
    }
  });
}

int ergolab_invariant_density(const ergolab_operator* op, double* h, ergolab_density_info* info) {
  return guarded([&] {
    require(op, "null operator");
    const SpectralReport r = invariant_density(op->op);
    if (h)
      for (size_t i = 0; i < r.h.size(); ++i) h[i] = r.h[i];
    if (info) *info = {r.iterations, r.residual, r.reducible ? 1 : 0, r.inv_h_integral};
  });
}

int ergolab_spectral_gap(const ergolab_operator* op, int n_eigs, ergolab_gap_info* out) {
  return guarded([&] {
    require(op && out, "null argument");
    const SpectralReport r = spectral_gap(op->op, n_eigs);
    *out = {r.lambda1, r.gamma_hat, r.multiplicity, r.peripheral, r.non_mixing ? 1 : 0};
  });
}

int ergolab_renewal_check(const ergolab_scheme* s, size_t k, const double* theta, size_t n_theta, double* sigma_min,
                          ergolab_renewal_info* out) {
  return guarded([&] {
    require(s && (theta || n_theta == 0), "null argument");
    const UlamOperator L = ulam_matrix(s->scheme, k);
    const SpectralReport h = invariant_density(L);
    const UlamOperator P = conjugate_operator(L, h.h);
    const RenewalFamily fam = renewal_operators(P, s->scheme.max_tau());
    std::vector<std::complex<double>> zs{1.0};
    for (size_t i = 0; i < n_theta; ++i) zs.push_back(std::polar(1.0, theta[i]));
    const RenewalCheck rc = renewal_spectrum_check(fam, zs);
    for (size_t i = 0; sigma_min && i < n_theta; ++i) sigma_min[i] = rc.points[i + 1].sigma_min;
    if (out) *out = {fam.completeness, fam.truncation, rc.simple_at_one ? 1 : 0, rc.gamma_at_one};
  });
}

int ergolab_gordin(const ergolab_scheme* s, size_t k, const char* observable, double mean, ergolab_gordin_info* out) {
  return guarded([&] {
    require(s && observable && out, "null argument");
    const UlamOperator L = ulam_matrix(s->scheme, k);
    const SpectralReport h = invariant_density(L);
    const UlamOperator P = conjugate_operator(L, h.h);
    const WeightedObservable Phi = induced_observable(s->scheme, make_observable(observable).shifted(mean));
    const GordinResult g = gordin_solve(P, grid_values(L, s->scheme, Phi));
    *out = {g.residual, g.phi_hat_norm, g.koopman_residual, g.terms, g.converged ? 1 : 0};
  });
}

// ---- statistics

void ergolab_ensemble_defaults(ergolab_ensemble* e) {
  if (!e) return;
  const Ensemble d{builtin_map("doubling")};
  *e = {d.N, d.n, d.burn_in, d.seed, d.threads};
}

int ergolab_clt(const ergolab_map* map, const ergolab_ensemble* e, const char* observable, double threshold,
                ergolab_clt_result* out) {
  return guarded([&] {
    require(observable && out, "null argument");
    const Ensemble ens = to_ensemble(map, e);
    const Observable phi = make_observable(observable);
    const BirkhoffRun run = run_birkhoff(ens, phi.components[0]);
    const CLTReport c = clt_report(run, threshold);
    const FCLTReport f = fclt_paths(run, c.sigma2_gk, threshold);
    *out = {c.centering, c.sigma2_gk, c.sigma2_batch, c.ks,     c.ks_pvalue,         f.ks_end,
            f.ks_max,    f.ks_integral, c.pass ? 1 : 0, f.pass ? 1 : 0, c.degenerate ? 1 : 0,
            c.undefined_variance ? 1 : 0};
  });
}

int ergolab_correlation(const ergolab_map* map, const ergolab_ensemble* e, const char* v, const char* w,
                        size_t n_max, int method, size_t size, double* rho, double* stderr_, double* noise_floor) {
  return guarded([&] {
    require(v && w && rho, "null argument");
    const Ensemble ens = to_ensemble(map, e);
    CorrelationOptions co;
    if (method == ERGOLAB_CORR_OPERATOR) {
      if (size) co.grid = size;
    } else if (size) {
      co.window = size;
    }
    const Observable vo = make_observable(v), wo = make_observable(w);
    const DecayReport r = correlation(ens, vo.components[0], wo.components[0], n_max,
                                      method == ERGOLAB_CORR_OPERATOR ? CorrelationMethod::op
                                                                      : CorrelationMethod::monte_carlo,
                                      co);
    for (size_t n = 0; n <= n_max; ++n) {
      rho[n] = r.rho[n];
      if (stderr_) stderr_[n] = r.stderr_.empty() ? 0.0 : r.stderr_[n];
    }
    if (noise_floor) *noise_floor = r.noise_floor;
  });
}

int ergolab_fit_decay(const double* rho, size_t len, double noise_floor, size_t n0, ergolab_decay_fit* out) {
  return guarded([&] {
    require(rho && out, "null argument");
    const DecayFit f = decay_fit(std::vector<double>(rho, rho + len), noise_floor, n0);
    *out = {static_cast<int>(f.kind), f.rate, f.r2, f.exp_rate, f.exp_r2, f.poly_beta, f.poly_r2, f.usable};
  });
}

int ergolab_envelope(const double* tau_tail, size_t tail_len, const double* rho, size_t len, double noise_floor,
                     double q, double delta, double* value, double* C, int* below) {
  return guarded([&] {
    require(tau_tail && rho, "null argument");
    const Envelope env = theorem_envelope(std::vector<double>(tau_tail, tau_tail + tail_len),
                                          std::vector<double>(rho, rho + len), noise_floor, q, delta);
    for (size_t i = 0; value && i < len; ++i) value[i] = env.value[i];
    if (C) *C = env.C;
    if (below) *below = env.below ? 1 : 0;
  });
}

int ergolab_large_deviation(const ergolab_map* map, const ergolab_ensemble* e, const char* observable, double center,
                            double epsilon, const size_t* grid, size_t n_grid, double* prob, size_t* count,
                            double* upper, ergolab_ld_info* info) {
  return guarded([&] {
    require(observable && grid && epsilon > 0, "invalid argument");
    const Ensemble ens = to_ensemble(map, e);
    const Observable v = make_observable(observable);
    const ScalarFn f = v.components[0];
    std::vector<std::size_t> g(grid, grid + n_grid);
    const LDReport r = large_deviation(ens, [f, center](double x) { return f(x) - center; }, epsilon, g);
    // Report in the caller's grid order.
    for (size_t i = 0; i < n_grid; ++i) {
      size_t j = 0;
      while (r.n[j] != grid[i]) ++j;
      if (prob) prob[i] = r.prob[j];
      if (count) count[i] = r.count[j];
      if (upper) upper[i] = r.upper[j];
    }
    if (info) *info = {r.exp_slope, r.loglog_slope, r.at_least_linear ? 1 : 0};
  });
}

// ---- runner

int ergolab_config_load(const char* path, ergolab_config** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new ergolab_config{load_config(path)};
  });
}

int ergolab_config_parse(const char* text, const char* source, const char* base_dir, ergolab_config** out) {
  return guarded([&] {
    require(text && out, "null argument");
    *out = new ergolab_config{parse_config(text, source ? source : "<config>", base_dir ? base_dir : ".")};
  });
}

void ergolab_config_free(ergolab_config* cfg) { delete cfg; }

int ergolab_config_set_seed(ergolab_config* cfg, uint64_t seed) {
  return guarded([&] {
    require(cfg, "null config");
    cfg->cfg.stats.seed = seed;
  });
}

int ergolab_config_set_out_dir(ergolab_config* cfg, const char* dir) {
  return guarded([&] {
    require(cfg && dir && *dir, "empty output directory");
    cfg->cfg.out_dir = dir;
  });
}

int ergolab_config_set_threads(ergolab_config* cfg, unsigned threads) {
  return guarded([&] {
    require(cfg, "null config");
    cfg->cfg.threads = threads;
  });
}

const char* ergolab_config_out_dir(const ergolab_config* cfg) { return cfg ? cfg->cfg.out_dir.c_str() : ""; }
uint64_t ergolab_config_hash(const ergolab_config* cfg) { return cfg ? cfg->cfg.hash() : 0; }

int ergolab_run_command(const ergolab_config* cfg, const char* command, ergolab_run** out) {
  return guarded([&] {
    require(cfg && command && out, "null argument");
    const std::string c(command);
    if (c != "analyze-map" && c != "induce" && c != "spectrum" && c != "limits")
      fail(ErrorCode::invalid_argument, "unknown command '" + c + "'");
    *out = new ergolab_run{run_command(c, cfg->cfg)};
  });
}

void ergolab_run_free(ergolab_run* run) { delete run; }
int ergolab_run_exit_code(const ergolab_run* run) { return run ? run->result.exit_code : 1; }
size_t ergolab_run_file_count(const ergolab_run* run) { return run ? run->result.files.size() : 0; }
const char* ergolab_run_file(const ergolab_run* run, size_t i) {
  return run && i < run->result.files.size() ? run->result.files[i].c_str() : nullptr;
}
size_t ergolab_run_check_count(const ergolab_run* run) { return run ? run->result.checks.size() : 0; }
const char* ergolab_run_check_name(const ergolab_run* run, size_t i) {
  return run && i < run->result.checks.size() ? run->result.checks[i].name.c_str() : nullptr;
}
int ergolab_run_check_pass(const ergolab_run* run, size_t i) {
  return run && i < run->result.checks.size() && run->result.checks[i].pass ? 1 : 0;
}
const char* ergolab_run_check_detail(const ergolab_run* run, size_t i) {
  return run && i < run->result.checks.size() ? run->result.checks[i].detail.c_str() : nullptr;
}
size_t ergolab_run_message_count(const ergolab_run* run) { return run ? run->result.messages.size() : 0; }
const char* ergolab_run_message(const ergolab_run* run, size_t i) {
  return run && i < run->result.messages.size() ? run->result.messages[i].c_str() : nullptr;
}

}  // extern "C"
