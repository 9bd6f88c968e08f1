#include <cmath>
#include <random>

#include "doctest.h"
#include "ergolab/stats.hpp"
#include "oracles.hpp"

using namespace ergolab;

namespace {

Ensemble small(const char* map, std::size_t N, std::size_t n, std::uint64_t seed = 11) {
  Ensemble e{builtin_map(map)};
  e.N = N;
  e.n = n;
  e.seed = seed;
  return e;
}

}  // namespace

TEST_CASE("bit-shift orbits are exact doubling orbits") {
  Ensemble e = small("doubling", 1, 1);
  e.burn_in = 0;
  OrbitStream o(e, 0);
  for (int t = 0; t < 200; ++t) {
    const double x = o.x();
    o.step();
    const double y = o.x();
    // the new low bit is the only freedom
    CHECK(std::abs(y - std::fmod(2 * x, 1.0)) <= 0x1.0p-53);
  }
}

TEST_CASE("zero observable gives zero samples") {
  const auto s = birkhoff_samples(small("ulam", 50, 100), [](double) { return 0.0; });
  for (double v : s) CHECK(v == 0.0);
}

TEST_CASE("n = 1 samples are centred observable values") {
  double mean = 0;
  const auto s = birkhoff_samples(small("doubling", 20000, 1), [](double x) { return x; }, &mean);
  CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
  double m = 0;
  for (double v : s) m += v;
  CHECK(std::abs(m / s.size()) < 1e-12);
}

TEST_CASE("doubling Green-Kubo matches the autocovariance oracle") {
  const auto run = run_birkhoff(small("doubling", 4000, 2000), [](double x) { return x - 0.5; });
  for (int j = 0; j < 6; ++j) CHECK(run.acf[j] == doctest::Approx(oracle::doubling_acov_x(j)).epsilon(0.05));
  const auto gk = green_kubo_from_acf(run.acf, 3.0 / std::sqrt(double(run.acf_samples)));
  CHECK(gk.sigma2 == doctest::Approx(oracle::doubling_sigma2_x()).epsilon(0.03));
  CHECK_FALSE(gk.undefined);
}

TEST_CASE("coboundary has degenerate variance") {
  // psi o f - psi with psi(x) = x under doubling
  const auto f = builtin_map("doubling");
  const auto run = run_birkhoff(small("doubling", 2000, 1000),
                                [&](double x) { return f.eval_unchecked(x) - x; });
  const auto r = clt_report(run);
  CHECK(r.sigma2_gk < 0.01);
}

TEST_CASE("KS distance of reference normal samples") {
  std::mt19937_64 g(5);
  std::normal_distribution<double> nd(0.0, 2.0);
  std::vector<double> s(20000);
  for (auto& v : s) v = nd(g);
  const auto r = clt_test(s, 4.0);
  CHECK(r.ks < oracle::ks_critical_95(s.size()) * 1.3);
  CHECK(r.pass);
  CHECK(ks_pvalue(r.ks, s.size()) > 0.01);
  CHECK(ks_distance({0.0}, [](double x) { return x < 0 ? 0.0 : 1.0; }) == doctest::Approx(1.0));
}

TEST_CASE("Brownian max reference") {
  CHECK(brownian_max_cdf(-1.0) == 0.0);
  for (double c : {0.1, 0.7, 1.5}) CHECK(brownian_max_cdf(c) == doctest::Approx(oracle::brownian_max_cdf(c)));
}

TEST_CASE("FCLT paths start at zero and end at the samples") {
  const auto run = run_birkhoff(small("doubling", 200, 500), [](double x) { return x - 0.5; });
  for (std::size_t i = 0; i < run.samples.size(); ++i) {
    CHECK(run.path_max[i] >= 0.0);
    CHECK(run.path_max[i] >= run.samples[i]);
  }
}

TEST_CASE("scaling the observable scales the variance by four exactly") {
  const auto e = small("ulam", 1000, 500);
  const auto a = clt_report(run_birkhoff(e, [](double x) { return x; }));
  const auto b = clt_report(run_birkhoff(e, [](double x) { return 2 * x; }));
  CHECK(b.sigma2_gk == 4 * a.sigma2_gk);
  CHECK(b.sigma2_batch == 4 * a.sigma2_batch);
  CHECK(b.pass == a.pass);
}

TEST_CASE("results do not depend on the thread count") {
  Ensemble e = small("ulam", 64, 300);
  e.threads = 1;
  const auto a = run_birkhoff(e, [](double x) { return x; });
  e.threads = 4;
  const auto b = run_birkhoff(e, [](double x) { return x; });
  CHECK(a.samples == b.samples);
  CHECK(a.acf == b.acf);
  CHECK(a.sigma2_batch == b.sigma2_batch);
}

TEST_CASE("correlations") {
  auto e = small("doubling", 1000, 1);
  CorrelationOptions co;
  co.window = 2000;
  auto c = [](double x) { return std::cos(2 * M_PI * x); };
  const auto mc = correlation(e, c, c, 3, CorrelationMethod::monte_carlo, co);
  CHECK(mc.rho[0] == doctest::Approx(0.5).epsilon(0.02));
  CHECK(std::abs(mc.rho[1]) < 4 * mc.stderr_[1] + 1e-3);

  auto ind = [](double x) { return x < 0.25 ? 1.0 : 0.0; };
  auto u = small("ulam", 400, 1);
  co.window = 20000;
  const auto r = correlation(u, ind, ind, 6, CorrelationMethod::monte_carlo, co);
  for (int n = 0; n <= 6; ++n)
    CHECK(std::abs(r.rho[n] - oracle::ulam_indicator_correlation(0.25, n)) < 4 * r.stderr_[n] + 1e-4);
}

TEST_CASE("Monte Carlo and operator correlations agree on doubling") {
  auto e = small("doubling", 400, 1);
  CorrelationOptions co;
  co.window = 20000;
  co.grid = 1024;
  auto v = [](double x) { return x; };
  const auto mc = correlation(e, v, v, 20, CorrelationMethod::monte_carlo, co);
  const auto op = correlation(e, v, v, 20, CorrelationMethod::op, co);
  for (int n = 0; n <= 20; ++n) CHECK(std::abs(mc.rho[n] - op.rho[n]) <= 3 * mc.stderr_[n] + 1e-6);
}

TEST_CASE("decay fits on synthetic sequences") {
  std::vector<double> ex(30), po(30);
  for (int n = 0; n < 30; ++n) {
    ex[n] = std::exp(-0.7 * n);
    po[n] = std::pow(n + 1.0, -2.0);
  }
  const auto fe = decay_fit(ex, 0.0);
  CHECK(fe.kind == FitKind::exponential);
  CHECK(fe.rate == doctest::Approx(0.7).epsilon(1e-9));
  const auto fp = decay_fit(po, 0.0, 1);
  CHECK(fp.kind == FitKind::polynomial);
  CHECK(fp.rate == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(decay_fit(std::vector<double>(20, 1e-9), 1e-3).kind == FitKind::too_fast);
  CHECK(decay_fit({1, 0.5, 0.2}, 1e-3).kind == FitKind::insufficient);
}

TEST_CASE("envelope") {
  const std::vector<double> tail{1.0, 0.5, 0.25, 0.125, 0.0625};
  std::vector<double> rho(20);
  for (int n = 0; n < 20; ++n) rho[n] = std::exp(-0.5 * n);
  const auto env = theorem_envelope(tail, rho, 0.0, 2.0, 0.5);
  CHECK(env.C > 0.0);
  CHECK(env.below);
  CHECK(env.value[10] == doctest::Approx(std::pow(10.0, -2.0)));
}

TEST_CASE("large deviations") {
  auto e = small("doubling", 20000, 1);
  auto v = [](double x) { return x - 0.5; };
  const auto zero = large_deviation(e, v, 0.6, {1, 10, 100});
  for (double p : zero.prob) CHECK(p == 0.0);
  const auto one = large_deviation(e, v, 0.3, {1});
  CHECK(one.prob[0] == doctest::Approx(oracle::doubling_ld_n1(0.3)).epsilon(0.05));
  const auto a = large_deviation(e, v, 0.1, {50});
  const auto b = large_deviation(e, v, 0.2, {50});
  CHECK(b.prob[0] <= a.prob[0]);
  const auto none = large_deviation(small("doubling", 100, 1), v, 0.4, {1000});
  CHECK(none.count[0] == 0);
  CHECK(none.upper[0] == doctest::Approx(0.03));
}

TEST_CASE("vector covariance is symmetric and PSD") {
  Observable phi;
  phi.components = {[](double x) { return std::cos(2 * M_PI * x); }, [](double x) { return std::sin(2 * M_PI * x); }};
  const auto r = vector_covariance(small("doubling", 2000, 200), phi);
  CHECK(r.asymmetry < 1e-15);
  CHECK(r.psd);
  CHECK(r.cov(0, 0) == doctest::Approx(0.5).epsilon(0.1));
}
