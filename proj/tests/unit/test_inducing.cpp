#include <cmath>

#include "doctest.h"
#include "ergolab/error.hpp"
#include "ergolab/inducing.hpp"
#include "oracles.hpp"

using namespace ergolab;

namespace {

const InducedScheme& ulam_scheme() {
  static const InducedScheme s = [] {
    InducingParams p;
    p.tau_max = 40;
    return build_partition(builtin_map("ulam"), p);
  }();
  return s;
}

}  // namespace

TEST_CASE("doubling partition is dyadic") {
  InducingParams p;
  p.q0 = 6;
  const auto s = build_partition(builtin_map("doubling"), p);
  CHECK(s.cells().size() == oracle::dyadic_cells(6));
  CHECK(s.coverage() == doctest::Approx(1.0));
  for (const auto& c : s.cells()) {
    CHECK(c.tau == 6);
    CHECK(c.length() == doctest::Approx(1.0 / 64));
    CHECK(c.sup_inv == doctest::Approx(1.0 / 64));
  }
}

TEST_CASE("first entry and binding on Ulam") {
  const auto u = builtin_map("ulam");
  CHECK(first_entry_time(u, 0.52, 0.05, 10) == 0);
  CHECK(first_entry_time(u, 0.9, 0.05, 10) == 10);
  const auto b1 = binding_period(u, u.critical_set()[0], 0.5 + 1e-6, 200);
  const auto b2 = binding_period(u, u.critical_set()[0], 0.5 + 1e-3, 200);
  CHECK(b1.b > b2.b);
  CHECK_FALSE(b1.capped);
}

TEST_CASE("Ulam partition structure") {
  const auto& s = ulam_scheme();
  CHECK(s.coverage() >= 0.99);
  Real prev = 0;
  for (const auto& c : s.cells()) {
    CHECK(c.left >= prev);
    prev = c.right;
    CHECK(c.tau >= c.b);
    CHECK(c.tau <= s.params().q0 + c.b);
    CHECK(c.tau <= s.params().tau_max);
  }
  CHECK(s.ledger().loss() == doctest::Approx(1.0 - s.coverage()).epsilon(1e-6));
}

TEST_CASE("induced map is consistent with the cells") {
  const auto& s = ulam_scheme();
  const std::size_t i = s.cells().size() / 3;
  const Cell& c = s.cells()[i];
  const double y = 0.5 * (c.left_d() + c.right_d());
  CHECK(s.cell_of(y) == i);
  const auto ev = s.induced_map_eval(y);
  CHECK(ev.itinerary_matches);
  CHECK(to_double(s.iterate_on_cell(i, Real(y), c.tau)) == doctest::Approx(ev.value).epsilon(1e-9));
  const double back = s.pull_back(i, ev.value);
  CHECK(back == doctest::Approx(y).epsilon(1e-9));
}

TEST_CASE("binding estimates") {
  const auto& s = ulam_scheme();
  const auto st = cell_statistics(s);
  CHECK(st.M_hat > 0.0);
  CHECK(st.C_hat > 0.0);
  for (const auto& l : st.levels) {
    CHECK(l.sup_ratio <= st.M_hat * (1 + 1e-12));
  }
  const auto f1 = F_condition_sums(s, 1.0, st);
  CHECK(f1.sup_sum > 0.0);
  CHECK(std::isfinite(f1.var_sum));
}

TEST_CASE("return time distribution") {
  const auto& s = ulam_scheme();
  const auto t = tau_distribution(s, TauWeight::lebesgue);
  CHECK(t.tail[0] == doctest::Approx(s.coverage()).epsilon(1e-9));
  for (std::size_t n = 1; n < t.tail.size(); ++n) CHECK(t.tail[n] <= t.tail[n - 1]);
  CHECK_THROWS_AS(tau_distribution(s, TauWeight::mu_Y), Error);
}

TEST_CASE("induced observables") {
  const auto& s = ulam_scheme();
  const auto one = induced_observable(s, make_observable("one"));
  const Cell& c = s.cells()[s.cells().size() / 2];
  const double y = 0.5 * (c.left_d() + c.right_d());
  CHECK(one.eval(y) == doctest::Approx(c.tau));
  const auto w = weighted_bv_norm(s, one);
  CHECK(w == doctest::Approx(1.0));
}
