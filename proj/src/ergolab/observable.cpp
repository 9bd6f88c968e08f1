#include "ergolab/observable.hpp"

#include <cmath>
#include <numbers>

#include "ergolab/error.hpp"
#include "ergolab/kv_text.hpp"

namespace ergolab {

Observable Observable::scaled(double a) const {
  Observable o = *this;
  o.name = std::to_string(a) + "*" + name;
  for (auto& c : o.components) c = [f = c, a](double x) { return a * f(x); };
  o.declared_variation *= std::abs(a);
  o.sup_norm *= std::abs(a);
  return o;
}

Observable Observable::shifted(double b) const {
  Observable o = *this;
  o.name = name + "-" + std::to_string(b);
  for (auto& c : o.components) c = [f = c, b](double x) { return f(x) - b; };
  o.sup_norm += std::abs(b);
  return o;
}

Observable scalar_observable(std::string name, ScalarFn fn, double variation, double sup_norm) {
  Observable o;
  o.name = std::move(name);
  o.components.push_back(std::move(fn));
  o.declared_variation = variation;
  o.sup_norm = sup_norm;
  return o;
}

Observable make_observable(std::string_view spec) {
  const auto tok = split_ws(spec);
  if (tok.empty()) fail(ErrorCode::invalid_argument, "empty observable spec");
  const std::string& k = tok[0];
  auto arg = [&](std::size_t i) {
    if (i >= tok.size())
      fail(ErrorCode::invalid_argument, "observable '" + k + "' needs more parameters");
    return parse_double(tok[i], "observable", 0, k);
  };
  auto no_more = [&](std::size_t n) {
    if (tok.size() != n)
      fail(ErrorCode::invalid_argument, "observable '" + k + "' takes " + std::to_string(n - 1) +
                                            " parameter(s)");
  };
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  if (k == "identity" || k == "x") {
    no_more(1);
    return scalar_observable("x", [](double x) { return x; }, 1.0, 1.0);
  }
  if (k == "cos2pi") {
    no_more(1);
    return scalar_observable("cos2pi", [=](double x) { return std::cos(kTwoPi * x); }, 4.0, 1.0);
  }
  if (k == "sin2pi") {
    no_more(1);
    return scalar_observable("sin2pi", [=](double x) { return std::sin(kTwoPi * x); }, 4.0, 1.0);
  }
  if (k == "zero") {
    no_more(1);
    return scalar_observable("zero", [](double) { return 0.0; }, 0.0, 0.0);
  }
  if (k == "one") {
    no_more(1);
    return scalar_observable("one", [](double) { return 1.0; }, 0.0, 1.0);
  }
  if (k == "const") {
    no_more(2);
    const double c = arg(1);
    return scalar_observable("const", [=](double) { return c; }, 0.0, std::abs(c));
  }
  if (k == "indicator") {
    no_more(3);
    const double a = arg(1), b = arg(2);
    if (!(a < b)) fail(ErrorCode::invalid_argument, "indicator needs a < b");
    const double var = (a > 0.0 ? 1.0 : 0.0) + (b < 1.0 ? 1.0 : 0.0);
    return scalar_observable("indicator", [=](double x) { return (x >= a && x < b) ? 1.0 : 0.0; },
                             var, 1.0);
  }
  if (k == "power") {
    no_more(2);
    const double p = arg(1);
    if (!(p > 0.0)) fail(ErrorCode::invalid_argument, "power observable needs k > 0");
    return scalar_observable("power", [=](double x) { return std::pow(x, p); }, 1.0, 1.0);
  }
  fail(ErrorCode::invalid_argument, "unknown observable '" + k + "'");
}

double grid_variation(const ScalarFn& fn, std::size_t n) {
  if (n < 2) return 0.0;
  double v = 0.0;
  double prev = fn(0.0);
  for (std::size_t i = 1; i < n; ++i) {
    const double cur = fn(static_cast<double>(i) / static_cast<double>(n - 1));
    v += std::abs(cur - prev);
    prev = cur;
  }
  return v;
}

double estimate_variation(const ScalarFn& fn, double tol, std::size_t max_n) {
  std::size_t n = 64;
  double v = grid_variation(fn, n);
  while (n < max_n) {
    n *= 2;
    const double next = grid_variation(fn, n);
    if (std::abs(next - v) <= tol * std::max(1.0, std::abs(next))) return next;
    v = next;
  }
  return v;
}

}  // namespace ergolab
