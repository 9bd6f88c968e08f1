// Closed-form reference values used by the tests. Nothing here calls into
// the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace oracle {

inline double arcsine_pdf(double x) { return 1.0 / (M_PI * std::sqrt(x * (1.0 - x))); }
inline double arcsine_cdf(double x) { return 2.0 / M_PI * std::asin(std::sqrt(x)); }

// 4x(1-x): c = 1/2 maps to 1 then sits at the fixed point 0 where |f'| = 4.
inline double ulam_log_D(int n) { return n * std::log(4.0); }
inline double ulam_d(int) { return 0.5; }
inline double ulam_log_E(int n) { return (n - 1) * std::log(4.0) / 3.0; }

// Doubling: autocovariance of x - 1/2 is 2^-n / 12.
inline double doubling_acov_x(int n) { return std::ldexp(1.0, -n) / 12.0; }
inline double doubling_sigma2_x() { return 0.25; }
inline double doubling_sigma2_cos() { return 0.5; }

// Variance of x under the arcsine law.
inline double ulam_var_x() { return 0.125; }

/// mu(A & f^-n A) - mu(A)^2 for f = 4x(1-x), A = [0, a), computed in the
/// tent coordinate theta = (2/pi) asin(sqrt x) where the invariant law is
/// uniform and preimages are unions of intervals.
inline double ulam_indicator_correlation(double a, int n) {
  const double t = arcsine_cdf(a);
  std::vector<std::pair<double, double>> pre{{0.0, t}};
  for (int k = 0; k < n; ++k) {
    std::vector<std::pair<double, double>> next;
    next.reserve(pre.size() * 2);
    for (auto [lo, hi] : pre) {
      next.push_back({lo / 2, hi / 2});
      next.push_back({1 - hi / 2, 1 - lo / 2});
    }
    pre.swap(next);
  }
  double inter = 0.0;
  for (auto [lo, hi] : pre) inter += std::max(0.0, std::min(hi, t) - std::max(lo, 0.0));
  return inter - t * t;
}

inline double normal_cdf(double x, double var = 1.0) { return 0.5 * std::erfc(-x / std::sqrt(2.0 * var)); }

/// Reflection principle: P(max_{[0,1]} W <= c) = 2 Phi(c) - 1.
inline double brownian_max_cdf(double c) { return c <= 0 ? 0.0 : 2.0 * normal_cdf(c) - 1.0; }

/// 95% quantile of the Kolmogorov distance for N samples.
inline double ks_critical_95(std::size_t N) { return 1.36 / std::sqrt(static_cast<double>(N)); }

/// Partition of [0,1) by the doubling map with q0 free steps: 2^q0 cells.
inline std::size_t dyadic_cells(int q0) { return std::size_t{1} << q0; }

/// P(|x - 1/2| >= eps) under Lebesgue.
inline double doubling_ld_n1(double eps) { return std::max(0.0, 1.0 - 2.0 * eps); }

}  // namespace oracle
