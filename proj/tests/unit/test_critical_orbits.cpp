#include <cmath>

#include "doctest.h"
#include "ergolab/critical_orbits.hpp"
#include "oracles.hpp"

using namespace ergolab;

TEST_CASE("Ulam critical orbit matches the chain rule") {
  const auto u = builtin_map("ulam");
  const auto d = orbit_data(u, u.critical_set()[0], 50);
  CHECK_FALSE(d.degenerate);
  for (int n = 1; n <= 50; ++n) {
    CHECK(d.log_D[n] == doctest::Approx(oracle::ulam_log_D(n)).epsilon(1e-9));
    CHECK(std::exp(d.log_d[n]) == doctest::Approx(oracle::ulam_d(n)).epsilon(1e-9));
    if (n > 1) CHECK(d.log_E[n] == doctest::Approx(oracle::ulam_log_E(n)).epsilon(1e-9));
  }
  const auto fit = exp_recurrence_check(d);
  CHECK(fit.success);
  CHECK(fit.c0 == doctest::Approx(std::log(4.0) / 3.0).epsilon(0.01));
}

TEST_CASE("summability on the Ulam orbit converges") {
  const auto u = builtin_map("ulam");
  const auto d = orbit_data(u, u.critical_set()[0], 120);
  const auto r = summability_report(d, 1.0, 120);
  CHECK(r.v3 == Verdict::converging);
  CHECK(r.v4 == Verdict::converging);
  CHECK(r.S4 > 0.0);
}

TEST_CASE("tail classification") {
  std::vector<double> geo(101), harm(101), slow(101), fast(101);
  for (int n = 1; n <= 100; ++n) {
    geo[n] = -0.5 * n;
    harm[n] = -std::log(static_cast<double>(n));
    slow[n] = -0.5 * std::log(static_cast<double>(n));
    fast[n] = -2.0 * std::log(static_cast<double>(n));
  }
  CHECK(classify_tail(geo) == Verdict::converging);
  CHECK(classify_tail(fast) == Verdict::converging);
  CHECK(classify_tail(slow) == Verdict::diverging);
  CHECK(classify_tail(harm) == Verdict::inconclusive);
}

TEST_CASE("recurrence fit on synthetic data") {
  std::vector<double> v(41);
  for (int n = 1; n <= 40; ++n) v[n] = 0.3 * n + std::log(2.0);
  const auto f = exp_recurrence_fit(v);
  CHECK(f.c0 == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(f.C0 == doctest::Approx(2.0).epsilon(1e-6));
}
