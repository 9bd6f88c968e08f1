#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace ergolab {

using ScalarFn = std::function<double(double)>;

/// Vector observable on [0,1] with finite variation. Scalar pipelines use
/// component 0.
struct Observable {
  std::string name;
  std::vector<ScalarFn> components;
  double declared_variation = 0.0;
  double sup_norm = 0.0;

  std::size_t dimension() const { return components.size(); }
  double operator()(double x) const { return components[0](x); }

  Observable scaled(double a) const;
  Observable shifted(double b) const;  // phi - b
};

Observable scalar_observable(std::string name, ScalarFn fn, double variation, double sup_norm);

/// Names: identity | x, cos2pi, sin2pi, zero, one, const <K>,
/// indicator <a> <b> (the set [a,b)), power <k>.
Observable make_observable(std::string_view spec);

/// Variation of fn over [0,1] sampled on a uniform grid of n points.
double grid_variation(const ScalarFn& fn, std::size_t n);

/// grid_variation doubled until the relative change drops below tol.
double estimate_variation(const ScalarFn& fn, double tol = 1e-6, std::size_t max_n = 1u << 20);

}  // namespace ergolab
