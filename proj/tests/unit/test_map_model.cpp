#include <cmath>

#include "doctest.h"
#include "ergolab/error.hpp"
#include "ergolab/kv_text.hpp"
#include "ergolab/map_model.hpp"

using namespace ergolab;

TEST_CASE("builtin maps evaluate") {
  const auto d = builtin_map("doubling");
  CHECK(d.binary_shift());
  CHECK(d.eval(0.3) == doctest::Approx(0.6));
  CHECK(d.eval(0.75) == doctest::Approx(0.5));
  const auto u = builtin_map("ulam");
  CHECK(u.eval(0.5) == doctest::Approx(1.0));
  CHECK(u.eval(0.25) == doctest::Approx(0.75));
  REQUIRE(u.critical_set().size() == 2);
  CHECK(u.critical_set()[0].label() == "c0.5-");
  CHECK(u.critical_set()[1].label() == "c0.5+");
  CHECK(u.derivative(0.1, 1) == doctest::Approx(3.2));
  CHECK(u.derivative(0.1, 2) == doctest::Approx(-8.0));
}

TEST_CASE("cusp has a singular point") {
  const auto c = builtin_map("cusp", BuiltinParams{0.75});
  bool singular = false;
  for (const auto& p : c.critical_set()) singular = singular || p.singular();
  CHECK(singular);
  const double near = std::abs(c.derivative(0.5 + 1e-12, 1));
  CHECK(near > 1e3);
  CHECK(near > 5 * std::abs(c.derivative(0.5 + 1e-8, 1)));
}

TEST_CASE("derivative at a critical location needs a one-sided limit") {
  const auto u = builtin_map("ulam");
  try {
    (void)u.derivative(0.5, 1);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::one_sided_limit);
  }
}

TEST_CASE("map text round trip and validation") {
  const char* text =
      "schema_version = 1\n"
      "name = tent\n"
      "branch = 0 0.5 poly 0 2\n"
      "branch = 0.5 1 poly 2 -2\n";
  const auto m = parse_map_text(text, "tent.map");
  CHECK(m.name() == "tent");
  CHECK(m.eval(0.75) == doctest::Approx(0.5));
  CHECK(m.critical_set().empty());

  const char* gap =
      "schema_version = 1\nname = bad\nbranch = 0 0.4 poly 0 2\nbranch = 0.5 1 poly 2 -2\n";
  CHECK_THROWS_AS(parse_map_text(gap, "bad.map"), Error);

  const char* unknown = "schema_version = 1\nname = x\ncolour = red\n";
  try {
    (void)parse_map_text(unknown, "u.map");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse);
    CHECK(std::string(e.what()).find("u.map:3") != std::string::npos);
  }
}

TEST_CASE("order verification accepts the declared order and names a wrong one") {
  const auto u = builtin_map("ulam");
  const auto ok = verify_order(u, u.critical_set()[0], 0.01, 200);
  CHECK_FALSE(ok.mismatch);
  CHECK(ok.value.min == doctest::Approx(4.0).epsilon(1e-3));

  CriticalPoint wrong = u.critical_set()[0];
  wrong.order = 3.0;
  const auto bad = verify_order(u, wrong, 0.01, 200);
  CHECK(bad.mismatch);
  CHECK(bad.diagnostic.find(wrong.label()) != std::string::npos);
}

TEST_CASE("expansion outside Delta") {
  const auto d = builtin_map("doubling");
  const auto r = verify_expansion(d, 0.05, 50, 200, 1);
  CHECK(r.lambda == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  const auto u = builtin_map("ulam");
  const auto ru = verify_expansion(u, 0.05, 60, 500, 1);
  CHECK(ru.lambda > 0.0);
}

TEST_CASE("kv parser") {
  const auto doc = parse_kv("# c\n[a]\nx = 1\n; c\ny=two words\n", "t");
  REQUIRE(doc.entries.size() == 2);
  CHECK(doc.entries[0].section == "a");
  CHECK(doc.entries[1].value == "two words");
  CHECK(doc.entries[1].line == 5);
  CHECK_THROWS_AS(parse_kv("[a\n", "t"), Error);
  CHECK_THROWS_AS(parse_double("1.5x", "t", 1, "f"), Error);
}
