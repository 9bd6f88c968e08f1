#include "ergolab/critical_orbits.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ergolab {

CriticalOrbitData orbit_data(const PiecewiseMap& map, const CriticalPoint& c, std::size_t N) {
  if (N < 1) fail(ErrorCode::invalid_argument, "orbit_data: horizon must be >= 1");
  const double inf = std::numeric_limits<double>::infinity();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CriticalOrbitData d;
  d.point = c;
  d.horizon = N;
  d.orbit.assign(N + 1, nan);
  d.log_d.assign(N + 1, -inf);
  d.log_D.assign(N + 1, nan);
  d.log_E.assign(N + 1, nan);
  d.orbit[0] = c.location;
  d.log_D[0] = 0.0;
  d.log_E[0] = 0.0;

  const double two_l_minus_1 = 2.0 * c.order - 1.0;
  Real y = map.eval_t(Real(c.location), c.side);
  if (y < 0) y = 0;
  if (y > 1) y = 1;
  for (std::size_t n = 1; n <= N; ++n) {
    d.orbit[n] = to_double(y);
    Real dist = std::numeric_limits<Real>::infinity();
    for (const auto& cp : map.critical_set()) dist = std::min(dist, Real(abs(y - Real(cp.location))));
    d.log_d[n] = (dist == 0) ? -inf : (isinf(dist) ? inf : to_double(log(dist)));
    d.log_E[n] = d.log_D[n - 1] / two_l_minus_1;
    if (dist == 0) {
      d.degenerate = true;
      d.degenerate_at = n;
      break;
    }
    const auto& br = map.branches()[map.branch_index_t(y, Side::plus)];
    d.log_D[n] = d.log_D[n - 1] + to_double(log(br.formula.abs_deriv1(y)));
    y = br.formula.value(y);
    if (y < 0) y = 0;
    if (y > 1) y = 1;
  }
  return d;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::converging: return "converging";
    case Verdict::diverging: return "diverging";
    case Verdict::inconclusive: return "inconclusive";
    case Verdict::not_applicable: return "not-applicable";
  }
  return "?";
}

namespace {

struct Line {
  double slope = 0.0, intercept = 0.0, rms = 0.0;
};

Line fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  Line l;
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  l.slope = sxx > 0 ? sxy / sxx : 0.0;
  l.intercept = my - l.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (l.intercept + l.slope * x[i]);
    ss += r * r;
  }
  l.rms = std::sqrt(ss / n);
  return l;
}

double log_sum_exp(const std::vector<double>& v, std::size_t from, std::size_t to) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = from; i <= to; ++i) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = from; i <= to; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

}  // namespace

Verdict classify_tail(std::span<const double> log_terms, double* ratio, double* beta) {
  const std::size_t N = log_terms.size() - 1;
  if (N < 8) return Verdict::inconclusive;
  for (std::size_t n = 1; n <= N; ++n)
    if (std::isnan(log_terms[n]) || log_terms[n] == std::numeric_limits<double>::infinity())
      return Verdict::diverging;
  std::vector<double> ns, lns, ys;
  for (std::size_t n = N - N / 4; n <= N; ++n) {
    if (!std::isfinite(log_terms[n])) continue;
    ns.push_back(static_cast<double>(n));
    lns.push_back(std::log(static_cast<double>(n)));
    ys.push_back(log_terms[n]);
  }
  if (ns.size() < 3) {
    // Tail terms are exactly zero.
    if (ratio) *ratio = 0.0;
    if (beta) *beta = std::numeric_limits<double>::infinity();
    return Verdict::converging;
  }
  const double r = std::exp(fit_line(ns, ys).slope);
  const double b = -fit_line(lns, ys).slope;
  if (ratio) *ratio = r;
  if (beta) *beta = b;
  if (r >= 1.0 || b < 0.9) return Verdict::diverging;
  if (b > 1.1) return Verdict::converging;
  return Verdict::inconclusive;
}

SummabilityReport summability_report(const CriticalOrbitData& data, double p, std::size_t N) {
  if (N > data.horizon) fail(ErrorCode::invalid_argument, "summability_report: N exceeds orbit horizon");
  if (N < 1) fail(ErrorCode::invalid_argument, "summability_report: N must be >= 1");
  const double inf = std::numeric_limits<double>::infinity();
  SummabilityReport r;
  r.p = p;
  r.N = N;
  r.log_term3.assign(N + 1, -inf);
  r.log_term4.assign(N + 1, -inf);
  for (std::size_t n = 1; n <= N; ++n) {
    const double lnp = p * std::log(static_cast<double>(n));
    const double ld = data.log_d[n];
    if (data.degenerate && n >= data.degenerate_at) {
      r.log_term3[n] = inf;
      r.log_term4[n] = lnp - data.log_E[n];
      continue;
    }
    // log(log d^-1) is -inf when d = 1, giving a zero term.
    r.log_term3[n] = lnp - ld + std::log(-ld) - data.log_E[n];
    r.log_term4[n] = lnp - data.log_E[n];
  }
  r.S3 = std::exp(log_sum_exp(r.log_term3, 1, N));
  r.S4 = std::exp(log_sum_exp(r.log_term4, 1, N));
  if (data.degenerate) {
    r.v3 = Verdict::diverging;
    r.v4 = data.degenerate_at > N ? classify_tail(r.log_term4, &r.ratio4, &r.beta4)
                                   : Verdict::diverging;
  } else {
    r.v3 = classify_tail(r.log_term3, &r.ratio3, &r.beta3);
    r.v4 = classify_tail(r.log_term4, &r.ratio4, &r.beta4);
  }
  if (data.singular()) r.v3 = r.v4 = Verdict::not_applicable;
  return r;
}

RecurrenceFit exp_recurrence_fit(std::span<const double> log_dE) {
  RecurrenceFit f;
  const std::size_t N = log_dE.size() - 1;
  if (N < 10) fail(ErrorCode::invalid_argument, "exp_recurrence_check: need N >= 10");
  std::vector<double> ns, ys;
  for (std::size_t n = 1; n <= N; ++n) {
    if (!std::isfinite(log_dE[n])) {
      f.hypothesis_fails = true;
      return f;
    }
    ns.push_back(static_cast<double>(n));
    ys.push_back(log_dE[n]);
  }
  const Line l = fit_line(ns, ys);
  f.c0 = l.slope;
  f.intercept = l.intercept;
  f.residual = l.rms;
  double logC = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ns.size(); ++i) logC = std::min(logC, ys[i] - f.c0 * ns[i]);
  f.C0 = std::exp(logC);
  f.hypothesis_fails = !(f.c0 > 0.0);
  bool holds = true;
  for (std::size_t i = 0; i < ns.size(); ++i)
    if (ys[i] < logC + f.c0 * ns[i] - 1e-12) holds = false;
  f.success = !f.hypothesis_fails && holds && f.C0 > 0.0;
  return f;
}

RecurrenceFit exp_recurrence_check(const CriticalOrbitData& data) {
  if (data.horizon < 10) fail(ErrorCode::invalid_argument, "exp_recurrence_check: need N >= 10");
  std::vector<double> v(data.horizon + 1, 0.0);
  for (std::size_t n = 1; n <= data.horizon; ++n) v[n] = data.log_dE(n);
  return exp_recurrence_fit(v);
}

}  // namespace ergolab
