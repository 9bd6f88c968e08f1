#include <cmath>
#include <complex>

#include "doctest.h"
#include "ergolab/transfer.hpp"
#include "oracles.hpp"

using namespace ergolab;

TEST_CASE("doubling k=2 matrix") {
  const auto op = ulam_matrix(builtin_map("doubling"), 2);
  const auto t = triplets(op.matrix);
  REQUIRE(t.size() == 4);
  for (auto [i, j, v] : t) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("rows are stochastic") {
  const auto op = ulam_matrix(builtin_map("ulam"), 256);
  for (int i = 0; i < op.matrix.outerSize(); ++i) {
    double s = 0;
    for (SparseRM::InnerIterator it(op.matrix, i); it; ++it) s += it.value();
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("invariant densities") {
  const auto d = invariant_density(ulam_matrix(builtin_map("doubling"), 1024));
  CHECK(l1_to_exact(d.h, [](double) { return 1.0; }, [](double x) { return x; }) < 1e-3);
  const auto u = invariant_density(ulam_matrix(builtin_map("ulam"), 4096));
  CHECK(l1_to_exact(u.h, oracle::arcsine_pdf, oracle::arcsine_cdf) < 0.05);
}

TEST_CASE("spectral gap") {
  const auto g = spectral_gap(ulam_matrix(builtin_map("ulam"), 512));
  CHECK(g.multiplicity == 1);
  CHECK(g.gamma_hat < 0.9);
  CHECK(g.lambda1 == doctest::Approx(1.0));
}

TEST_CASE("grid helpers") {
  CHECK(grid_bv_norm({1, 1, 1}) == doctest::Approx(1.0));
  CHECK(grid_bv_norm({0, 2, 0}) == doctest::Approx(6.0));
  const auto c = coarsen({1, 3, 2, 2}, 2);
  CHECK(c[0] == doctest::Approx(2.0));
  CHECK(l1_distance({1, 1}, {2, 0}) == doctest::Approx(1.0));
}

TEST_CASE("scheme operators, renewal and Gordin") {
  InducingParams p;
  p.tau_max = 30;
  const auto s = build_partition(builtin_map("ulam"), p);
  const auto L = ulam_matrix(s, 256);
  const auto h = invariant_density(L);
  const auto P = conjugate_operator(L, h.h);
  // P 1 = 1 on retained rows
  Eigen::VectorXd one = Eigen::VectorXd::Ones(256);
  Eigen::VectorXd p1 = P.matrix * one;
  for (int i = 0; i < 256; ++i)
    if (!P.empty_row[i]) CHECK(p1[i] == doctest::Approx(1.0).epsilon(1e-10));

  const auto fam = renewal_operators(P, s.max_tau());
  CHECK(fam.completeness <= fam.truncation + 1e-12);
  const auto rc = renewal_spectrum_check(fam, {1.0, std::polar(1.0, 1.0)});
  CHECK(rc.simple_at_one);
  CHECK(rc.points[1].sigma_min > 0.01);

  const auto phi = induced_observable(s, make_observable("x").shifted(0.5));
  const auto g = gordin_solve(P, grid_values(L, s, phi));
  CHECK(g.converged);
  CHECK(g.residual <= 1e-8 * g.phi_hat_norm);

  const auto tm = pushdown_measure(s, h.h, 256);
  double mass = 0;
  for (double v : tm.density) mass += v / 256;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(tm.mean_tau > 1.0);

  const auto tw = twisted_operator(L, grid_values(L, s, phi), {0.0, 0.1});
  CHECK(tw[0].surrogate == doctest::Approx(0.0));
  CHECK(tw[1].surrogate > 0.0);
}
