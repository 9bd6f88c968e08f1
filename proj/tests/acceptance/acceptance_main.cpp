// Acceptance runner: one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ergolab/critical_orbits.hpp"
#include "ergolab/experiment.hpp"
#include "ergolab/inducing.hpp"
#include "ergolab/map_model.hpp"
#include "ergolab/observable.hpp"
#include "ergolab/stats.hpp"
#include "ergolab/transfer.hpp"
#include "oracles.hpp"

using namespace ergolab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  std::vector<std::pair<std::string, bool>> checks;
  std::vector<std::string> notes;

  bool check(const std::string& what, bool ok) {
    checks.emplace_back(what, ok);
    return ok;
  }
  void note(const char* fmt, double a, double b = NAN, double c = NAN) {
    char buf[256];
    std::snprintf(buf, sizeof buf, fmt, a, b, c);
    notes.emplace_back(buf);
  }
  bool pass() const {
    for (const auto& c : checks)
      if (!c.second) return false;
    return !checks.empty();
  }
};

PiecewiseMap ulam() { return builtin_map("ulam"); }
PiecewiseMap doubling() { return builtin_map("doubling"); }

InducingParams ulam_scheme_params(int tau_max = 60) {
  InducingParams p;
  p.delta = 0.05;
  p.q0 = 10;
  p.tau_max = tau_max;
  return p;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// 1: critical orbit of the Ulam map against the chain rule.
Outcome ac1() {
  Outcome o;
  const PiecewiseMap m = ulam();
  double worst = 0;
  for (const auto& c : m.critical_set()) {
    const CriticalOrbitData d = orbit_data(m, c, 50);
    for (int n = 1; n <= 50; ++n) {
      worst = std::max(worst, rel(d.log_D[n], oracle::ulam_log_D(n)));
      worst = std::max(worst, std::abs(d.log_d[n] - std::log(oracle::ulam_d(n))) / std::log(2.0));
      if (n >= 2) worst = std::max(worst, rel(d.log_E[n], oracle::ulam_log_E(n)));
    }
    const RecurrenceFit fit = exp_recurrence_check(orbit_data(m, c, 200));
    const double target = std::log(4.0) / 3.0;
    o.check("c0 within 1%", fit.success && rel(fit.c0, target) < 0.01);
    o.note("c0 %.6g (target %.6g)", fit.c0, target);
  }
  o.check("D_n, d_n, E_n relative error < 1e-9", worst < 1e-9);
  o.note("worst relative error %.3g", worst);
  return o;
}

// 2: invariant densities at k = 4096.
Outcome ac2() {
  Outcome o;
  const SpectralReport hd = invariant_density(ulam_matrix(doubling(), 4096));
  double l1 = 0;
  for (double v : hd.h) l1 += std::abs(v - 1.0) / static_cast<double>(hd.h.size());
  o.check("doubling L1 < 1e-3", l1 < 1e-3);
  o.note("doubling L1 %.3g", l1);
  const SpectralReport hu = invariant_density(ulam_matrix(ulam(), 4096));
  const double lu = l1_to_exact(hu.h, oracle::arcsine_pdf, oracle::arcsine_cdf);
  o.check("ulam L1 < 0.05", lu < 0.05);
  o.note("ulam L1 %.3g", lu);
  return o;
}

// 3: inducing structure and stability under tau_max doubling.
Outcome ac3() {
  Outcome o;
  const PiecewiseMap m = ulam();
  const InducedScheme s60 = build_partition(m, ulam_scheme_params(60));
  const InducedScheme s120 = build_partition(m, ulam_scheme_params(120));
  o.check("coverage >= 0.99", s60.coverage() >= 0.99);
  o.note("coverage %.6f", s60.coverage());
  std::size_t bad = 0;
  for (const Cell& c : s60.cells())
    if (c.tau < c.b || c.tau > s60.params().q0 + c.b) ++bad;
  o.check("tau in [b, q0 + b] on every cell", bad == 0);
  o.note("cells %.0f, violations %.0f", static_cast<double>(s60.cells().size()), static_cast<double>(bad));

  const CellStatistics a = cell_statistics(s60), b = cell_statistics(s120);
  const auto factor = [](double x, double y) { return std::max(x / y, y / x); };
  o.check("M_hat within factor 2", factor(a.M_hat, b.M_hat) < 2.0);
  o.check("C_hat within factor 2", factor(a.C_hat, b.C_hat) < 2.0);
  o.note("M_hat %.4g -> %.4g", a.M_hat, b.M_hat);
  o.note("C_hat %.4g -> %.4g", a.C_hat, b.C_hat);
  const FConditionSums f60 = F_condition_sums(s60, 1.0, a), f120 = F_condition_sums(s120, 1.0, b);
  o.check("(F1_1) stable < 5%", rel(f60.sup_sum, f120.sup_sum) < 0.05);
  o.check("(F2_1) stable < 5%", rel(f60.var_sum, f120.var_sum) < 0.05);
  o.note("F1 %.6g -> %.6g", f60.sup_sum, f120.sup_sum);
  o.note("F2 %.6g -> %.6g", f60.var_sum, f120.var_sum);
  return o;
}

// 4: spectral gaps and renewal operators.
Outcome ac4() {
  Outcome o;
  for (const char* name : {"doubling", "ulam"}) {
    const SpectralReport g = spectral_gap(ulam_matrix(builtin_map(name), 1024), 6);
    o.check(std::string(name) + " eigenvalue 1 simple, gamma < 0.9", g.multiplicity == 1 && g.gamma_hat < 0.9);
    o.note((std::string(name) + " multiplicity %.0f, gamma %.4g").c_str(), g.multiplicity, g.gamma_hat);
  }
  const SpectralReport g64 = spectral_gap(ulam_matrix(doubling(), 64), 6);
  o.check("doubling k=64 gamma = 0.5 +- 0.05", std::abs(g64.gamma_hat - 0.5) <= 0.05);
  o.note("doubling k=64 gamma %.4g", g64.gamma_hat);

  const InducedScheme s = build_partition(ulam(), ulam_scheme_params());
  const UlamOperator L = ulam_matrix(s, 512);
  const SpectralReport hd = invariant_density(L);
  const UlamOperator P = conjugate_operator(L, hd.h);
  const RenewalFamily fam = renewal_operators(P, s.max_tau());
  std::vector<std::complex<double>> zs;
  for (double t : {0.5, 1.0, 2.0, 3.0}) zs.push_back(std::polar(1.0, t));
  const RenewalCheck rc = renewal_spectrum_check(fam, zs);
  double smin = INFINITY;
  for (const auto& p : rc.points) smin = std::min(smin, p.sigma_min);
  o.check("sigma_min(Id - P(e^{i theta})) > 0.01", smin > 0.01);
  o.note("smallest sigma_min %.4g", smin);
  o.check("||sum P_n - P|| <= truncation", fam.completeness <= fam.truncation + 1e-12);
  o.note("completeness %.3g, truncation %.3g", fam.completeness, fam.truncation);
  return o;
}

// 5: martingale-coboundary split on the Ulam scheme.
Outcome ac5() {
  Outcome o;
  const PiecewiseMap m = ulam();
  const InducedScheme s = build_partition(m, ulam_scheme_params());
  const UlamOperator L = ulam_matrix(s, 512);
  const SpectralReport hd = invariant_density(L);
  const UlamOperator P = conjugate_operator(L, hd.h);
  const Observable x = make_observable("x");
  const WeightedObservable Phi = induced_observable(s, x.shifted(0.5));
  const GordinResult g = gordin_solve(P, grid_values(L, s, Phi));
  o.check("||P Phi_hat|| <= 1e-8 ||Phi_hat||", g.converged && g.residual <= 1e-8 * g.phi_hat_norm);
  o.note("residual %.3g, norm %.4g", g.residual, g.phi_hat_norm);
  o.note("grid Koopman residual %.3g", g.koopman_residual);
  return o;
}

Ensemble ensemble(const PiecewiseMap& m, std::size_t N, std::size_t n) {
  Ensemble e{m};
  e.N = N;
  e.n = n;
  e.seed = 1;
  return e;
}

// 6: central limit theorem on three cases.
Outcome ac6() {
  Outcome o;
  {
    const BirkhoffRun r = run_birkhoff(ensemble(doubling(), 20000, 10000), make_observable("x").components[0]);
    const CLTReport c = clt_report(r);
    o.check("doubling x: sigma2 = 1/4 +- 2%", rel(c.sigma2_gk, oracle::doubling_sigma2_x()) < 0.02);
    o.check("doubling x: KS < 0.05", c.ks < 0.05);
    o.note("doubling x: sigma2 %.5g, KS %.4g", c.sigma2_gk, c.ks);
  }
  {
    const BirkhoffRun r = run_birkhoff(ensemble(doubling(), 20000, 10000), make_observable("cos2pi").components[0]);
    const CLTReport c = clt_report(r);
    o.check("doubling cos2pi: sigma2 = 1/2 +- 2%", rel(c.sigma2_gk, oracle::doubling_sigma2_cos()) < 0.02);
    o.note("doubling cos2pi: sigma2 %.5g, KS %.4g", c.sigma2_gk, c.ks);
  }
  {
    const BirkhoffRun r = run_birkhoff(ensemble(ulam(), 20000, 5000), make_observable("x").components[0]);
    const CLTReport c = clt_report(r);
    o.check("ulam x: KS < 0.05", c.ks < 0.05 && !c.degenerate);
    o.note("ulam x: sigma2 %.5g, KS %.4g", c.sigma2_gk, c.ks);
  }
  return o;
}

// 7: running maximum of the rescaled Birkhoff path.
Outcome ac7() {
  Outcome o;
  const BirkhoffRun r = run_birkhoff(ensemble(doubling(), 20000, 10000), make_observable("x").components[0]);
  const FCLTReport f = fclt_paths(r, oracle::doubling_sigma2_x());
  o.check("KS of max W against 2Phi(c)-1 < 0.05", f.ks_max < 0.05);
  o.note("KS max %.4g, end %.4g, integral %.4g", f.ks_max, f.ks_end, f.ks_integral);
  return o;
}

// 8: decay of correlations on the Ulam map.
Outcome ac8() {
  Outcome o;
  const PiecewiseMap m = ulam();
  const Observable v = make_observable("indicator 0 0.25");
  CorrelationOptions co;
  co.window = 50000;
  const DecayReport dr =
      correlation(ensemble(m, 20000, 1), v.components[0], v.components[0], 16, CorrelationMethod::monte_carlo, co);
  const DecayFit fit = decay_fit(dr.rho, dr.noise_floor);
  o.check("exponential fit, R^2 > 0.9, c > 0",
          fit.kind == FitKind::exponential && fit.r2 > 0.9 && fit.rate > 0);
  o.notes.push_back(std::string("fit ") + fit_kind_name(fit.kind));
  o.note("rate %.4g (exact %.4g), R^2 %.4f", fit.rate, std::log(2.0), fit.r2);
  o.note("usable points %.0f, noise floor %.3g", static_cast<double>(fit.usable), dr.noise_floor);

  const InducedScheme s = build_partition(m, ulam_scheme_params());
  const SpectralReport hd = invariant_density(ulam_matrix(s, 512));
  const TauTail tt = tau_distribution(s, TauWeight::mu_Y, &hd.h);
  const Envelope env = theorem_envelope(tt.tail, dr.rho, dr.noise_floor, 2.0, 0.5);
  o.check("|rho(n)| below C * envelope", env.below);
  o.note("C %.4g", env.C);
  return o;
}

// 9: large deviations.
Outcome ac9() {
  Outcome o;
  const std::vector<std::size_t> grid{100, 200, 300, 400, 500, 600, 700, 800, 900, 1000};
  {
    Ensemble e = ensemble(doubling(), 20000, 1);
    const LDReport ld = large_deviation(e, [](double x) { return x - 0.5; }, 0.6, grid);
    std::size_t hits = 0;
    for (auto c : ld.count) hits += c;
    o.check("epsilon > |v|_inf gives zero tails", hits == 0);
    o.note("hits above epsilon 0.6: %.0f", static_cast<double>(hits));
  }
  {
    Ensemble e = ensemble(doubling(), 100000, 1);
    const LDReport ld = large_deviation(e, [](double x) { return x - 0.5; }, 0.1, grid);
    o.check("log tail decreasing at least linearly", ld.at_least_linear && ld.exp_slope < 0);
    o.note("exp slope %.4g, first count %.0f", ld.exp_slope, static_cast<double>(ld.count.front()));
  }
  return o;
}

std::map<std::string, std::string> read_csvs(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".csv") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[e.path().filename().string()] = ss.str();
  }
  return out;
}

// Largest absolute difference between numeric fields of two CSV texts.
double max_field_diff(const std::string& a, const std::string& b, bool* shape_ok) {
  std::istringstream sa(a), sb(b);
  std::string la, lb;
  double worst = 0;
  *shape_ok = true;
  while (true) {
    const bool ga = static_cast<bool>(std::getline(sa, la)), gb = static_cast<bool>(std::getline(sb, lb));
    if (ga != gb) {
      *shape_ok = false;
      return worst;
    }
    if (!ga) return worst;
    std::istringstream fa(la), fb(lb);
    std::string xa, xb;
    while (true) {
      const bool ha = static_cast<bool>(std::getline(fa, xa, ',')), hb = static_cast<bool>(std::getline(fb, xb, ','));
      if (ha != hb) {
        *shape_ok = false;
        return worst;
      }
      if (!ha) break;
      if (xa == xb) continue;
      char* ea = nullptr;
      char* eb = nullptr;
      const double va = std::strtod(xa.c_str(), &ea), vb = std::strtod(xb.c_str(), &eb);
      if (ea == xa.c_str() || eb == xb.c_str()) {
        *shape_ok = false;
        return worst;
      }
      worst = std::max(worst, std::abs(va - vb));
    }
  }
}

// 10: byte-identical reruns and thread independence.
Outcome ac10() {
  Outcome o;
  const std::string text =
      "schema_version = 1\n"
      "[map]\nbuiltin = ulam\n"
      "[analysis]\nexpansion_orbits = 200\n"
      "[inducing]\ntau_max = 40\n"
      "[operator]\nk = 1024\nk_gap = 256\nk_scheme = 256\n"
      "[stats]\nN = 2000\nn = 1000\ndecay_N = 200\ndecay_window = 5000\nld_N = 2000\n";
  const fs::path root = fs::temp_directory_path() / "ergolab_acceptance_10";
  fs::remove_all(root);
  const char* commands[] = {"analyze-map", "induce", "spectrum", "limits"};
  bool identical = true, shape = true;
  double worst = 0;
  for (const char* cmd : commands) {
    std::map<std::string, std::string> runs[3];
    const unsigned threads[3] = {1, 1, 4};
    for (int r = 0; r < 3; ++r) {
      ExperimentConfig cfg = parse_config(text, "acceptance.cfg");
      cfg.out_dir = (root / (std::string(cmd) + "-" + std::to_string(r))).string();
      cfg.threads = threads[r];
      (void)run_command(cmd, cfg);
      runs[r] = read_csvs(cfg.out_dir);
    }
    if (runs[0].empty() || runs[0] != runs[1]) identical = false;
    if (runs[0].size() != runs[2].size()) shape = false;
    for (const auto& [name, body] : runs[0]) {
      auto it = runs[2].find(name);
      if (it == runs[2].end()) {
        shape = false;
        continue;
      }
      bool ok = true;
      worst = std::max(worst, max_field_diff(body, it->second, &ok));
      shape = shape && ok;
    }
  }
  fs::remove_all(root);
  o.check("rerun gives byte-identical CSVs", identical);
  o.check("thread count changes no value by more than 1e-13", shape && worst <= 1e-13);
  o.note("largest thread difference %.3g", worst);
  return o;
}

const std::vector<std::pair<const char*, Outcome (*)()>> kCriteria = {
    {"critical orbit exactness", ac1},     {"invariant densities", ac2},
    {"inducing structure", ac3},           {"spectral and renewal", ac4},
    {"martingale decomposition", ac5},     {"central limit theorem", ac6},
    {"functional CLT", ac7},               {"decay of correlations", ac8},
    {"large deviations", ac9},             {"reproducibility", ac10},
};

bool run_one(int n) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = kCriteria[n - 1].second();
  } catch (const std::exception& e) {
    o.check(std::string("exception: ") + e.what(), false);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const auto& [what, ok] : o.checks) std::printf("    %s %s\n", ok ? "ok  " : "FAIL", what.c_str());
  for (const auto& s : o.notes) std::printf("    - %s\n", s.c_str());
  std::printf("AC%-2d %s  %s (%.1f s)\n", n, o.pass() ? "PASS" : "FAIL", kCriteria[n - 1].first, secs);
  std::fflush(stdout);
  return o.pass();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int criterion = 0;
  app.add_option("--criterion", criterion, "criterion number, 0 for all")->check(CLI::Range(0, 10));
  CLI11_PARSE(app, argc, argv);
  bool all = true;
  if (criterion > 0) {
    all = run_one(criterion);
  } else {
    for (int n = 1; n <= 10; ++n) all = run_one(n) && all;
  }
  return all ? 0 : 1;
}
