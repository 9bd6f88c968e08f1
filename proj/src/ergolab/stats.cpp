#include "ergolab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ergolab/error.hpp"
#include "ergolab/parallel.hpp"

namespace ergolab {

namespace {

constexpr std::uint64_t kMask53 = (std::uint64_t{1} << 53) - 1;

double neumaier(const std::vector<double>& v) {
  double s = 0.0, c = 0.0;
  for (double x : v) {
    const double t = s + x;
    c += (std::abs(s) >= std::abs(x)) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  return s + c;
}

struct LineFit {
  double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit f;
  const double n = static_cast<double>(x.size());
  if (x.size() < 2) return f;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    sse += r * r;
  }
  f.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
  return f;
}

void check_ensemble(const Ensemble& e) {
  if (e.N == 0 || e.n == 0) throw Error(ErrorCode::invalid_argument, "ensemble needs N > 0 and n > 0");
  if (e.law == InitialLaw::density && e.density.empty())
    throw Error(ErrorCode::invalid_argument, "density initial law without a density");
}

}  // namespace

OrbitStream::OrbitStream(const Ensemble& e, std::uint64_t index)
    : map_(e.map), ens_(e), rng_(e.seed, index), shift_(e.map.binary_shift()) {
  reseed();
  for (std::size_t t = 0; t < e.burn_in; ++t) step();
}

void OrbitStream::reseed() {
  double x;
  if (ens_.law == InitialLaw::lebesgue) {
    x = rng_.open_uniform();
  } else {
    const auto& h = ens_.density;
    const double total = std::accumulate(h.begin(), h.end(), 0.0);
    double u = rng_.uniform() * total;
    std::size_t i = 0;
    while (i + 1 < h.size() && u >= h[i]) u -= h[i++];
    x = (static_cast<double>(i) + rng_.open_uniform()) / static_cast<double>(h.size());
  }
  if (shift_) {
    m_ = static_cast<std::uint64_t>(std::ldexp(x, 53)) & kMask53;
    x_ = static_cast<double>(m_) * 0x1.0p-53;
  } else {
    x_ = x;
  }
}

void OrbitStream::step() {
  if (shift_) {
    if (pool_bits_ == 0) {
      pool_ = rng_.bits();
      pool_bits_ = 64;
    }
    m_ = ((m_ << 1) & kMask53) | (pool_ & 1u);
    pool_ >>= 1;
    --pool_bits_;
    x_ = static_cast<double>(m_) * 0x1.0p-53;
    return;
  }
  x_ = map_.eval_unchecked(x_);
  if (!(x_ > 0.0 && x_ < 1.0)) {
    ++restarts_;
    x_ = rng_.open_uniform();
  }
}

BirkhoffRun run_birkhoff(const Ensemble& e, const ScalarFn& phi, const BirkhoffOptions& opt) {
  check_ensemble(e);
  const std::size_t N = e.N, n = e.n;
  BirkhoffRun run;
  std::vector<std::size_t> restarts(N, 0);

  if (opt.mean) {
    run.mean = *opt.mean;
    run.mean_estimated = false;
  } else {
    std::vector<double> sums(N);
    parallel_for(N, e.threads, [&](std::size_t i) {
      OrbitStream o(e, i);
      double s = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        s += phi(o.x());
        o.step();
      }
      sums[i] = s;
    });
    run.mean = neumaier(sums) / (static_cast<double>(N) * static_cast<double>(n));
  }

  const std::size_t lags = opt.acf_lags;
  const std::size_t window = std::min(opt.acf_window, n);
  const std::size_t B = std::max<std::size_t>(1, std::min(opt.batches, n));
  const std::size_t blen = n / B;
  run.samples.resize(N);
  run.path_max.resize(N);
  run.path_integral.resize(N);
  std::vector<double> acf_slots(N * (lags + 1), 0.0);
  std::vector<double> batch_slots(N, 0.0);
  const double sqn = std::sqrt(static_cast<double>(n));
  const double m = run.mean;

  parallel_for(N, e.threads, [&](std::size_t i) {
    OrbitStream o(e, i);
    std::vector<double> ring(lags + 1, 0.0);
    double* acc = &acf_slots[i * (lags + 1)];
    double S = 0.0, mx = 0.0, integral = 0.0, bsum = 0.0, bsq = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double y = phi(o.x()) - m;
      if (t < window) {
        ring[t % (lags + 1)] = y;
        const std::size_t top = std::min(t, lags);
        for (std::size_t j = 0; j <= top; ++j) acc[j] += y * ring[(t - j) % (lags + 1)];
      }
      const double prev = S;
      S += y;
      integral += 0.5 * (prev + S);
      mx = std::max(mx, S);
      bsum += y;
      if ((t + 1) % blen == 0 && (t + 1) / blen <= B) {
        bsq += bsum * bsum;
        bsum = 0.0;
      }
      o.step();
    }
    run.samples[i] = S / sqn;
    run.path_max[i] = mx / sqn;
    run.path_integral[i] = integral / (sqn * static_cast<double>(n));
    batch_slots[i] = bsq / (static_cast<double>(B) * static_cast<double>(blen));
    restarts[i] = o.restarts();
  });

  run.acf.assign(lags + 1, 0.0);
  std::vector<double> col(N);
  for (std::size_t j = 0; j <= lags; ++j) {
    for (std::size_t i = 0; i < N; ++i) col[i] = acf_slots[i * (lags + 1) + j];
    const std::size_t count = window > j ? window - j : 0;
    run.acf[j] = count ? neumaier(col) / (static_cast<double>(N) * static_cast<double>(count)) : 0.0;
  }
  run.acf_samples = N * window;
  run.sigma2_batch = neumaier(batch_slots) / static_cast<double>(N);
  run.restarts = std::accumulate(restarts.begin(), restarts.end(), std::size_t{0});
  return run;
}

std::vector<double> birkhoff_samples(const Ensemble& e, const ScalarFn& phi, double* mean) {
  BirkhoffOptions opt;
  opt.acf_lags = 0;
  opt.acf_window = 0;
  auto run = run_birkhoff(e, phi, opt);
  if (mean) *mean = run.mean;
  return std::move(run.samples);
}

GreenKubo green_kubo_from_acf(const std::vector<double>& acf, double noise_floor) {
  GreenKubo g;
  if (acf.empty()) return g;
  g.head = acf[0];
  for (std::size_t j = 1; j < acf.size(); ++j) g.head += 2.0 * acf[j];
  if (acf.size() > 1) {
    std::vector<double> tail(acf.begin() + 1, acf.end());
    const DecayFit fit = decay_fit(tail, noise_floor, 1);
    const double nmax = static_cast<double>(acf.size() - 1);
    if (fit.kind == FitKind::exponential && fit.rate > 0) {
      const double A = std::exp(fit.exp_intercept), c = fit.rate;
      g.tail = 2.0 * A * std::exp(-c * (nmax + 1)) / (1.0 - std::exp(-c));
    } else if (fit.kind == FitKind::polynomial) {
      if (fit.rate <= 1.0) {
        g.undefined = true;
      } else {
        const double A = std::exp(fit.poly_intercept), beta = fit.rate;
        g.tail = 2.0 * A * std::pow(nmax + 0.5, 1.0 - beta) / (beta - 1.0);
      }
    }
    // Sign-alternating or noisy tails carry no reliable sign; the fitted
    // magnitude bounds them and is not added.
    bool same_sign = true;
    for (std::size_t j = 1; j < acf.size(); ++j)
      if (std::abs(acf[j]) > noise_floor && acf[j] < 0) same_sign = false;
    if (!same_sign) g.tail = 0.0;
  }
  g.sigma2 = g.head + g.tail;
  return g;
}

GreenKubo green_kubo_sigma(const Ensemble& e, const ScalarFn& phi, std::size_t n_max,
                           std::optional<double> mean) {
  BirkhoffOptions opt;
  opt.acf_lags = n_max;
  opt.mean = mean;
  const auto run = run_birkhoff(e, phi, opt);
  return green_kubo_from_acf(run.acf, 3.0 / std::sqrt(static_cast<double>(run.acf_samples)));
}

double normal_cdf(double x, double variance) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0 * variance));
}

double brownian_max_cdf(double c) { return c <= 0.0 ? 0.0 : 2.0 * normal_cdf(c) - 1.0; }

double ks_distance(std::vector<double> s, const std::function<double(double)>& cdf) {
  if (s.empty()) return 1.0;
  std::sort(s.begin(), s.end());
  const double N = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double F = cdf(s[i]);
    d = std::max({d, static_cast<double>(i + 1) / N - F, F - static_cast<double>(i) / N});
  }
  return d;
}

double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

Moments moments(const std::vector<double>& v) {
  Moments m;
  if (v.empty()) return m;
  const double N = static_cast<double>(v.size());
  m.mean = neumaier(v) / N;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double x : v) {
    const double d = x - m.mean, d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= N;
  m3 /= N;
  m4 /= N;
  m.variance = m2;
  m.skewness = m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0;
  m.kurtosis = m2 > 0 ? m4 / (m2 * m2) - 3.0 : 0.0;
  return m;
}

CLTReport clt_test(const std::vector<double>& samples, double sigma2, double threshold) {
  CLTReport r;
  r.threshold = threshold;
  r.sigma2_gk = sigma2;
  r.moments = moments(samples);
  if (!(sigma2 > 1e-12)) {
    r.degenerate = true;
    r.ks = std::nan("");
    r.pass = r.moments.variance < 0.01;
    return r;
  }
  r.ks = ks_distance(samples, [sigma2](double x) { return normal_cdf(x, sigma2); });
  r.ks_pvalue = ks_pvalue(r.ks, samples.size());
  r.pass = r.ks < threshold;
  return r;
}

CLTReport clt_report(const BirkhoffRun& run, double threshold) {
  const GreenKubo gk = green_kubo_from_acf(run.acf, 3.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, run.acf_samples))));
  CLTReport r = clt_test(run.samples, gk.sigma2, threshold);
  r.sigma2_batch = run.sigma2_batch;
  r.gk_tail = gk.tail;
  r.undefined_variance = gk.undefined;
  r.centering = run.mean;
  if (gk.undefined) r.pass = false;
  return r;
}

FCLTReport fclt_paths(const BirkhoffRun& run, double sigma2, double threshold) {
  FCLTReport r;
  r.sigma2 = sigma2;
  r.threshold = threshold;
  if (!(sigma2 > 1e-12)) return r;
  const double s = std::sqrt(sigma2);
  auto scaled = [s](std::vector<double> v) {
    for (double& x : v) x /= s;
    return v;
  };
  r.ks_end = ks_distance(scaled(run.samples), [](double x) { return normal_cdf(x); });
  r.ks_max = ks_distance(scaled(run.path_max), brownian_max_cdf);
  r.ks_integral = ks_distance(scaled(run.path_integral), [](double x) { return normal_cdf(x, 1.0 / 3.0); });
  r.pass = r.ks_end < threshold && r.ks_max < threshold && r.ks_integral < threshold;
  return r;
}

DecayReport correlation(const Ensemble& e, const ScalarFn& v, const ScalarFn& w, std::size_t n_max,
                        CorrelationMethod method, const CorrelationOptions& opt) {
  DecayReport r;
  r.rho.assign(n_max + 1, 0.0);
  if (method == CorrelationMethod::op) {
    const UlamOperator L = ulam_matrix(e.map, opt.grid);
    const SpectralReport sp = invariant_density(L);
    const std::size_t k = L.k;
    constexpr int sub = 16;
    std::vector<double> vg(k), wg(k);
    for (std::size_t i = 0; i < k; ++i) {
      double a = 0, b = 0;
      for (int s = 0; s < sub; ++s) {
        const double x = (static_cast<double>(i) + (s + 0.5) / sub) / static_cast<double>(k);
        a += v(x);
        b += w(x);
      }
      vg[i] = a / sub;
      wg[i] = b / sub;
    }
    Eigen::RowVectorXd u(k);
    double mv = 0, mw = 0;
    for (std::size_t i = 0; i < k; ++i) {
      u[i] = vg[i] * sp.h[i];
      mv += u[i] / static_cast<double>(k);
      mw += wg[i] * sp.h[i] / static_cast<double>(k);
    }
    Eigen::Map<const Eigen::VectorXd> wv(wg.data(), k);
    for (std::size_t j = 0; j <= n_max; ++j) {
      r.rho[j] = u.dot(wv) / static_cast<double>(k) - mv * mw;
      u = u * L.matrix;
    }
    r.mean_v = mv;
    r.mean_w = mw;
    r.noise_floor = 0.0;
    return r;
  }

  check_ensemble(e);
  const std::size_t N = e.N, L = std::max(opt.window, n_max + 1);
  const std::size_t stride = n_max + 3;  // lags, sum v, sum w
  std::vector<double> slots(N * stride, 0.0);
  parallel_for(N, e.threads, [&](std::size_t i) {
    OrbitStream o(e, i);
    std::vector<double> ring(n_max + 1, 0.0);
    double* acc = &slots[i * stride];
    double sv = 0, sw = 0;
    for (std::size_t t = 0; t < L; ++t) {
      const double x = o.x();
      const double vx = v(x), wx = w(x);
      ring[t % (n_max + 1)] = vx;
      const std::size_t top = std::min(t, n_max);
      for (std::size_t j = 0; j <= top; ++j) acc[j] += ring[(t - j) % (n_max + 1)] * wx;
      sv += vx;
      sw += wx;
      o.step();
    }
    acc[n_max + 1] = sv;
    acc[n_max + 2] = sw;
  });

  std::vector<double> col(N);
  auto column_sum = [&](std::size_t j) {
    for (std::size_t i = 0; i < N; ++i) col[i] = slots[i * stride + j];
    return neumaier(col);
  };
  const double total = static_cast<double>(N) * static_cast<double>(L);
  r.mean_v = column_sum(n_max + 1) / total;
  r.mean_w = column_sum(n_max + 2) / total;
  r.stderr_.assign(n_max + 1, 0.0);
  for (std::size_t j = 0; j <= n_max; ++j) {
    const double cnt = static_cast<double>(L - j);
    r.rho[j] = column_sum(j) / (static_cast<double>(N) * cnt) - r.mean_v * r.mean_w;
    // spread of per-orbit estimates
    double s2 = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const double est = slots[i * stride + j] / cnt - r.mean_v * r.mean_w;
      s2 += (est - r.rho[j]) * (est - r.rho[j]);
    }
    r.stderr_[j] = N > 1 ? std::sqrt(s2 / static_cast<double>(N - 1) / static_cast<double>(N)) : 0.0;
  }
  r.samples = N * L;
  r.noise_floor = 3.0 / std::sqrt(total);
  return r;
}

const char* fit_kind_name(FitKind k) {
  switch (k) {
    case FitKind::exponential: return "exponential";
    case FitKind::polynomial: return "polynomial";
    case FitKind::too_fast: return "decay-too-fast";
    case FitKind::insufficient: return "insufficient";
  }
  return "?";
}

DecayFit decay_fit(const std::vector<double>& rho, double noise_floor, std::size_t n0) {
  DecayFit f;
  std::vector<double> xe, ye, xp, yp;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    const double a = std::abs(rho[i]);
    if (!(a > noise_floor) || !std::isfinite(a)) continue;
    const double n = static_cast<double>(n0 + i);
    xe.push_back(n);
    ye.push_back(std::log(a));
    if (n >= 1) {
      xp.push_back(std::log(n));
      yp.push_back(std::log(a));
    }
  }
  f.usable = xe.size();
  if (f.usable == 0) {
    bool any = false;
    for (std::size_t i = 0; i < rho.size(); ++i) any = any || (n0 + i >= 1);
    f.kind = any ? FitKind::too_fast : FitKind::insufficient;
    return f;
  }
  if (f.usable < 10) {
    f.kind = FitKind::insufficient;
    return f;
  }
  const LineFit e = least_squares(xe, ye);
  f.exp_rate = -e.slope;
  f.exp_r2 = e.r2;
  f.exp_intercept = e.intercept;
  const LineFit p = least_squares(xp, yp);
  f.poly_beta = -p.slope;
  f.poly_r2 = p.r2;
  f.poly_intercept = p.intercept;
  if (f.exp_r2 >= f.poly_r2) {
    f.kind = FitKind::exponential;
    f.rate = f.exp_rate;
    f.r2 = f.exp_r2;
  } else {
    f.kind = FitKind::polynomial;
    f.rate = f.poly_beta;
    f.r2 = f.poly_r2;
  }
  return f;
}

Envelope theorem_envelope(const std::vector<double>& tau_tail, const std::vector<double>& rho,
                          double noise_floor, double q, double delta) {
  Envelope env;
  auto tail_at = [&](std::size_t j) { return j < tau_tail.size() ? tau_tail[j] : 0.0; };
  env.value.resize(rho.size());
  for (std::size_t n = 0; n < rho.size(); ++n) {
    const double dn = delta * static_cast<double>(n);
    const std::size_t start = static_cast<std::size_t>(std::floor(dn)) + 1;
    double s = 0;
    for (std::size_t j = start; j < tau_tail.size(); ++j) s += tau_tail[j];
    const double nn = static_cast<double>(std::max<std::size_t>(n, 1));
    env.value[n] = s + static_cast<double>(n) * tail_at(static_cast<std::size_t>(std::ceil(dn))) +
                   std::pow(nn, -q);
  }
  const std::size_t half = std::max<std::size_t>(1, rho.size() / 2);
  for (std::size_t n = 1; n < half && n < rho.size(); ++n)
    env.C = std::max(env.C, std::abs(rho[n]) / env.value[n]);
  env.below = true;
  for (std::size_t n = 1; n < rho.size(); ++n)
    if (std::abs(rho[n]) > env.C * env.value[n] + noise_floor) env.below = false;
  return env;
}

LDReport large_deviation(const Ensemble& e, const ScalarFn& v, double epsilon,
                         const std::vector<std::size_t>& n_grid) {
  check_ensemble(e);
  LDReport r;
  r.epsilon = epsilon;
  r.n = n_grid;
  std::sort(r.n.begin(), r.n.end());
  const std::size_t G = r.n.size();
  if (G == 0) return r;
  const std::size_t N = e.N, top = r.n.back();
  std::vector<unsigned char> hit(N * G, 0);
  parallel_for(N, e.threads, [&](std::size_t i) {
    OrbitStream o(e, i);
    double S = 0;
    std::size_t g = 0;
    for (std::size_t t = 1; t <= top; ++t) {
      S += v(o.x());
      o.step();
      while (g < G && r.n[g] == t) {
        hit[i * G + g] = std::abs(S) >= epsilon * static_cast<double>(t);
        ++g;
      }
    }
  });
  r.samples = N;
  r.prob.resize(G);
  r.count.resize(G);
  r.upper.resize(G);
  std::vector<double> xs, ys, ls;
  const double Nd = static_cast<double>(N);
  for (std::size_t g = 0; g < G; ++g) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < N; ++i) c += hit[i * G + g];
    r.count[g] = c;
    r.prob[g] = static_cast<double>(c) / Nd;
    const double p = r.prob[g];
    r.upper[g] = c == 0 ? 3.0 / Nd : std::min(1.0, p + 2.0 * std::sqrt(p * (1 - p) / Nd));
    if (c > 0) {
      xs.push_back(static_cast<double>(r.n[g]));
      ls.push_back(std::log(static_cast<double>(r.n[g])));
      ys.push_back(std::log(p));
    }
  }
  r.exp_slope = least_squares(xs, ys).slope;
  r.loglog_slope = least_squares(ls, ys).slope;
  // Every later point must sit below the chord through the first two
  // resolved points, within counting noise; zero counts are consistent.
  bool ok = xs.size() >= 2 && r.exp_slope < 0;
  if (ok) {
    const double slope = (ys[1] - ys[0]) / (xs[1] - xs[0]);
    ok = slope < 0;
    for (std::size_t g = 0, k = 0; g < G && ok; ++g) {
      if (r.count[g] == 0) continue;
      if (k++ < 2) continue;
      const double line = ys[0] + slope * (static_cast<double>(r.n[g]) - xs[0]);
      const double slack = 3.0 / std::sqrt(static_cast<double>(r.count[g]));
      if (std::log(r.prob[g]) > line + slack) ok = false;
    }
  }
  r.at_least_linear = ok;
  return r;
}

CovarianceReport vector_covariance(const Ensemble& e, const Observable& phi) {
  check_ensemble(e);
  const std::size_t d = phi.dimension(), N = e.N, n = e.n;
  std::vector<double> sums(N * d, 0.0);
  parallel_for(N, e.threads, [&](std::size_t i) {
    OrbitStream o(e, i);
    for (std::size_t t = 0; t < n; ++t) {
      const double x = o.x();
      for (std::size_t c = 0; c < d; ++c) sums[i * d + c] += phi.components[c](x);
      o.step();
    }
  });
  Eigen::MatrixXd X(N, d);
  const double sqn = std::sqrt(static_cast<double>(n));
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t c = 0; c < d; ++c) X(i, c) = sums[i * d + c];
  const Eigen::RowVectorXd mean = X.colwise().mean();
  X.rowwise() -= mean;
  X /= sqn;
  CovarianceReport r;
  r.cov = (X.transpose() * X) / static_cast<double>(N);
  r.asymmetry = (r.cov - r.cov.transpose()).cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (r.cov + r.cov.transpose()));
  r.min_eigenvalue = es.eigenvalues().minCoeff();
  r.psd = r.min_eigenvalue >= -1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  return r;
}

}  // namespace ergolab
