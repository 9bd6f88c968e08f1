#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ergolab/error.hpp"
#include "ergolab/real.hpp"

namespace ergolab {

enum class Side { minus, plus };

inline const char* side_symbol(Side s) { return s == Side::plus ? "+" : "-"; }

/// Closed-form branch expression. Two kinds cover every shipped map and the
/// map-file format:
///   polynomial   a0 + a1 x + ... + an x^n
///   power        offset + scale * |stretch * (x - anchor)|^exponent
/// The power kind puts a critical or singular point at `anchor` with order
/// `exponent`, and evaluates accurately arbitrarily close to it.
struct BranchFormula {
  enum class Kind { polynomial, power };

  Kind kind = Kind::polynomial;
  std::vector<double> coeffs;
  double offset = 0.0;
  double scale = 0.0;
  double stretch = 1.0;
  double anchor = 0.0;
  double exponent = 1.0;

  static BranchFormula polynomial(std::vector<double> coeffs);
  static BranchFormula power(double offset, double scale, double stretch,
                             double anchor, double exponent);

  template <class T>
  T value(const T& x) const;
  template <class T>
  T deriv1(const T& x) const;
  template <class T>
  T deriv2(const T& x) const;
  /// |f'(x)|, +inf at a singular anchor and 0 at a critical anchor.
  template <class T>
  T abs_deriv1(const T& x) const;
  /// Inverse of the formula restricted to the monotone interval [lo, hi].
  template <class T>
  T inverse(const T& y, const T& lo, const T& hi) const;
};

struct Branch {
  double left = 0.0;
  double right = 1.0;
  BranchFormula formula;
  bool increasing = true;
};

struct CriticalPoint {
  double location = 0.0;
  Side side = Side::plus;
  double order = 2.0;

  bool singular() const { return order < 1.0; }
  /// e.g. "c0.5+"
  std::string label() const;
};

class PiecewiseMap {
 public:
  /// Validates coverage, monotonicity, range and critical-point data.
  PiecewiseMap(std::string name, std::vector<Branch> branches,
               std::vector<CriticalPoint> critical_set);

  const std::string& name() const { return name_; }
  std::span<const Branch> branches() const { return branches_; }
  std::span<const CriticalPoint> critical_set() const { return critical_; }

  /// Branch holding x; a boundary point belongs to the branch on `side`.
  std::size_t branch_index(double x, Side side = Side::plus) const;
  template <class T>
  std::size_t branch_index_t(const T& x, Side side = Side::plus) const;

  double eval(double x, Side side = Side::plus) const;
  template <class T>
  T eval_t(const T& x, Side side = Side::plus) const {
    return branches_[branch_index_t(x, side)].formula.value(x);
  }
  /// Unchecked evaluation for hot loops; x must lie in [0,1].
  double eval_unchecked(double x) const {
    return branches_[locate(x)].formula.value(x);
  }
  double abs_deriv_unchecked(double x) const {
    return branches_[locate(x)].formula.abs_deriv1(x);
  }

  /// f'(x) or f''(x). Signed infinities are returned near singular points;
  /// querying exactly at a critical location raises one_sided_limit.
  double derivative(double x, int order, Side side = Side::plus) const;

  /// min over the critical set of |x - c|, +inf when the set is empty.
  double distance_to_critical(double x) const;

  /// Index of the critical point whose one-sided neighbourhood holds x, or
  /// -1. Delta(c+) = [c, c+delta), Delta(c-) = (c-delta, c].
  template <class T>
  int delta_owner(const T& x, double delta) const {
    for (std::size_t i = 0; i < critical_.size(); ++i) {
      const T c = T(critical_[i].location);
      if (critical_[i].side == Side::plus) {
        if (x >= c && x < c + T(delta)) return static_cast<int>(i);
      } else if (x <= c && x > c - T(delta)) {
        return static_cast<int>(i);
      }
    }
    return -1;
  }

  /// Interior branch boundaries together with critical locations, sorted.
  const std::vector<double>& cut_points() const { return cuts_; }

  /// Maps of the form x -> 2x mod 1 admit an exact bit-shift orbit engine.
  bool binary_shift() const { return binary_shift_; }
  void mark_binary_shift() { binary_shift_ = true; }

 private:
  std::size_t locate(double x) const;

  std::string name_;
  std::vector<Branch> branches_;
  std::vector<CriticalPoint> critical_;
  std::vector<double> cuts_;
  bool binary_shift_ = false;
};

// ---------------------------------------------------------------------------
// Builtins and map files

struct BuiltinParams {
  double gamma = 0.75;  // cusp exponent
};

/// doubling, ulam, cusp
PiecewiseMap builtin_map(std::string_view name, const BuiltinParams& params = {});

/// Parses the map definition format documented in README.md.
PiecewiseMap parse_map_text(std::string_view text, std::string_view source);
PiecewiseMap load_map_file(const std::string& path);

// ---------------------------------------------------------------------------
// (A1) order verification

struct RatioBounds {
  double min = 0.0;
  double max = 0.0;
  double log_slope = 0.0;  // drift of log ratio against log distance
};

struct OrderReport {
  CriticalPoint point;
  double delta = 0.0;
  RatioBounds value;   // |f(x)-f(c)| / d^l
  RatioBounds first;   // |f'(x)| / d^(l-1)
  RatioBounds second;  // |f''(x)| / d^(l-2)
  std::vector<double> distances;
  bool mismatch = false;
  std::string diagnostic;
};

OrderReport verify_order(const PiecewiseMap& map, const CriticalPoint& c,
                         double delta, std::size_t n_samples);

// ---------------------------------------------------------------------------
// (A2) expansion away from the critical set

struct ExpansionReport {
  double delta = 0.0;
  double kappa = 0.0;          // min |(f^n)'| over segments ending in Delta
  bool kappa_vacuous = false;  // no segment ever entered Delta
  double c_delta = 0.0;
  double lambda = 0.0;
  bool inconclusive = false;
  std::size_t segments = 0;
  double kappa_witness = 0.0;       // start point achieving kappa
  std::vector<double> min_log_deriv;  // envelope by n (index n-1)
  std::vector<std::size_t> counts;    // segments surviving n steps
};

ExpansionReport verify_expansion(const PiecewiseMap& map, double delta,
                                 std::size_t horizon, std::size_t n_orbits,
                                 std::uint64_t seed);

// ---------------------------------------------------------------------------
// Template definitions

namespace detail {
template <class T>
T infinity() {
  return std::numeric_limits<T>::infinity();
}
}  // namespace detail

template <class T>
T BranchFormula::value(const T& x) const {
  using std::abs;
  using std::pow;
  if (kind == Kind::polynomial) {
    T acc = 0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + T(*it);
    return acc;
  }
  const T u = abs(T(stretch) * (x - T(anchor)));
  T p;
  if (exponent == 2.0)
    p = u * u;
  else if (exponent == 1.0)
    p = u;
  else
    p = (u == 0) ? T(0) : T(pow(u, T(exponent)));
  return T(offset) + T(scale) * p;
}

template <class T>
T BranchFormula::deriv1(const T& x) const {
  using std::abs;
  using std::pow;
  if (kind == Kind::polynomial) {
    T acc = 0;
    for (std::size_t k = coeffs.size(); k-- > 1;) acc = acc * x + T(double(k) * coeffs[k]);
    return acc;
  }
  const T w = T(stretch) * (x - T(anchor));
  const T u = abs(w);
  const T sgn = (w < 0) ? T(-1) : T(1);
  const T factor = T(scale) * T(exponent) * T(stretch) * sgn;
  if (u == 0) {
    if (exponent < 1.0) return factor * detail::infinity<T>();
    return exponent == 1.0 ? factor : T(0);
  }
  T p;
  if (exponent == 2.0)
    p = u;
  else
    p = T(pow(u, T(exponent - 1.0)));
  return factor * p;
}

template <class T>
T BranchFormula::deriv2(const T& x) const {
  using std::abs;
  using std::pow;
  if (kind == Kind::polynomial) {
    T acc = 0;
    for (std::size_t k = coeffs.size(); k-- > 2;)
      acc = acc * x + T(double(k) * double(k - 1) * coeffs[k]);
    return acc;
  }
  const T u = abs(T(stretch) * (x - T(anchor)));
  const T factor = T(scale) * T(exponent) * T(exponent - 1.0) * T(stretch) * T(stretch);
  if (exponent == 2.0 || exponent == 1.0) return factor;
  if (u == 0) return (exponent < 2.0 ? factor * detail::infinity<T>() : T(0));
  return factor * T(pow(u, T(exponent - 2.0)));
}

template <class T>
T BranchFormula::abs_deriv1(const T& x) const {
  using std::abs;
  return abs(deriv1(x));
}

template <class T>
T BranchFormula::inverse(const T& y, const T& lo, const T& hi) const {
  using std::abs;
  using std::pow;
  using std::sqrt;
  const T vlo = value(lo);
  const T vhi = value(hi);
  const bool inc = vhi >= vlo;
  // Clamp to the branch image so the inverse never leaves [lo, hi].
  if (inc ? (y <= vlo) : (y >= vlo)) return lo;
  if (inc ? (y >= vhi) : (y <= vhi)) return hi;

  if (kind == Kind::power) {
    T r = (y - T(offset)) / T(scale);
    if (r < 0) r = 0;
    T u;
    if (exponent == 2.0)
      u = sqrt(r);
    else if (exponent == 1.0)
      u = r;
    else
      u = T(pow(r, T(1.0 / exponent)));
    const T mid = (lo + hi) / 2;
    const T dir = (mid >= T(anchor)) ? T(1) : T(-1);
    T x = T(anchor) + dir * u / T(stretch);
    if (x < lo) x = lo;
    if (x > hi) x = hi;
    return x;
  }
  if (coeffs.size() <= 2) {
    const T a0 = coeffs.empty() ? T(0) : T(coeffs[0]);
    const T a1 = coeffs.size() < 2 ? T(0) : T(coeffs[1]);
    T x = (y - a0) / a1;
    if (x < lo) x = lo;
    if (x > hi) x = hi;
    return x;
  }
  if (coeffs.size() == 3 && coeffs[2] != 0.0) {
    // Cancellation-free quadratic roots.
    const T c0 = T(coeffs[0]) - y, c1 = T(coeffs[1]), c2 = T(coeffs[2]);
    T disc = c1 * c1 - 4 * c2 * c0;
    if (disc < 0) disc = 0;
    const T q = (c1 >= 0) ? T(-(c1 + sqrt(disc)) / 2) : T((sqrt(disc) - c1) / 2);
    const T r1 = q / c2;
    const T r2 = (q != 0) ? T(c0 / q) : r1;
    const T mid = (lo + hi) / 2;
    T x = (abs(r1 - mid) <= abs(r2 - mid)) ? r1 : r2;
    if (x < lo) x = lo;
    if (x > hi) x = hi;
    return x;
  }
  // Safeguarded Newton on a monotone polynomial piece.
  T a = lo, b = hi;
  T x = a + (b - a) * (y - vlo) / (vhi - vlo);
  for (int it = 0; it < 200; ++it) {
    const T fx = value(x) - y;
    if (fx == 0) return x;
    if ((fx > 0) == inc)
      b = x;
    else
      a = x;
    const T d = deriv1(x);
    T next = (d != 0) ? T(x - fx / d) : T((a + b) / 2);
    if (!(next > a && next < b)) next = (a + b) / 2;
    if (abs(next - x) <= std::numeric_limits<T>::epsilon() * (abs(x) + 1)) return next;
    x = next;
  }
  return x;
}

template <class T>
std::size_t PiecewiseMap::branch_index_t(const T& x, Side side) const {
  if (!(x >= 0 && x <= 1)) fail(ErrorCode::domain, "point outside [0,1]");
  std::size_t lo = 0, hi = branches_.size();
  // first branch whose right end exceeds x (plus side) or reaches x (minus side)
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    const T r = T(branches_[mid].right);
    const bool before = side == Side::plus ? (r <= x) : (r < x);
    if (before)
      lo = mid + 1;
    else
      hi = mid;
  }
  if (lo >= branches_.size()) lo = branches_.size() - 1;
  if (side == Side::minus && lo > 0 && x == T(branches_[lo].left) && x > 0) --lo;
  return lo;
}

}  // namespace ergolab
