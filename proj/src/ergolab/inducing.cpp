#include "ergolab/inducing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "ergolab/parallel.hpp"

namespace ergolab {

namespace {

struct Piece {
  Real lo, hi;
  Real a, b;  // f^depth(lo), f^depth(hi)
  int depth = 0;
  int l0 = -1;
  int crit = -1;
  std::vector<std::uint8_t> itin;
};

struct SupVar {
  double sup = 0.0;
  double var = 0.0;
  bool converged = true;
};

template <class G>
SupVar adaptive_sup_var(double width, G&& g, double tol, int max_m) {
  int m = 4;
  std::vector<double> v(m + 1);
  for (int i = 0; i <= m; ++i) v[i] = g(width * i / m);
  auto measure = [](const std::vector<double>& s) {
    SupVar r;
    r.sup = std::abs(s[0]);
    for (std::size_t i = 1; i < s.size(); ++i) {
      r.sup = std::max(r.sup, std::abs(s[i]));
      r.var += std::abs(s[i] - s[i - 1]);
    }
    return r;
  };
  SupVar cur = measure(v);
  while (m < max_m) {
    std::vector<double> nv(2 * m + 1);
    for (int i = 0; i <= m; ++i) nv[2 * i] = v[i];
    for (int i = 0; i < m; ++i) nv[2 * i + 1] = g(width * (2 * i + 1) / (2 * m));
    m *= 2;
    v.swap(nv);
    const SupVar next = measure(v);
    const double floor = 1e-12 * next.sup;
    const bool ok = std::abs(next.var - cur.var) <= tol * std::max(next.var, floor) + floor &&
                    std::abs(next.sup - cur.sup) <= tol * next.sup;
    cur = next;
    if (ok) return cur;
  }
  cur.converged = false;
  return cur;
}

Real clamp01(Real y) {
  if (y < 0) return Real(0);
  if (y > 1) return Real(1);
  return y;
}

class Builder {
 public:
  Builder(const PiecewiseMap& map, const InducingParams& p) : map_(map), p_(p) {
    const auto crit = map.critical_set();
    for (const auto& c : crit) {
      std::vector<Real> v(p.tau_max + 2), t(p.tau_max + 2);
      v[0] = Real(c.location);
      Real y = clamp01(map.eval_t(Real(c.location), c.side));
      for (int n = 1; n <= p.tau_max + 1; ++n) {
        v[n] = y;
        Real d = std::numeric_limits<Real>::infinity();
        for (const auto& cc : crit) d = std::min(d, Real(abs(y - Real(cc.location))));
        t[n] = Real(p.bind_factor) * d;
        y = clamp01(map.eval_t(y, Side::plus));
      }
      orbit_.push_back(std::move(v));
      thresh_.push_back(std::move(t));
    }
    for (double c : map.cut_points()) cuts_.push_back(Real(c));
    for (const auto& c : crit) {
      for (double s : {c.location - p.delta, c.location, c.location + p.delta})
        if (s > 0.0 && s < 1.0) delta_cuts_.push_back(Real(s));
    }
  }

  void run() {
    std::vector<Piece> stack;
    stack.push_back({Real(0), Real(1), Real(0), Real(1), 0, -1, -1, {}});
    while (!stack.empty()) {
      Piece p = std::move(stack.back());
      stack.pop_back();
      if (p.l0 < 0)
        free_step(std::move(p), stack);
      else
        bind_step(std::move(p), stack);
      if (cells_.size() > p_.max_cells)
        fail(ErrorCode::internal, "build_partition: cell limit exceeded; raise max_cells");
    }
  }

  std::vector<Cell> cells_;
  DiscardLedger ledger_;

 private:
  Real pull(const Piece& p, Real y) const {
    for (int k = p.depth - 1; k >= 0; --k) {
      const auto& br = map_.branches()[p.itin[k]];
      y = br.formula.inverse(y, Real(br.left), Real(br.right));
    }
    return y;
  }

  /// Splits p at the image values strictly inside its image interval.
  std::vector<Piece> split(const Piece& p, std::vector<Real> values) const {
    const Real ilo = std::min(p.a, p.b), ihi = std::max(p.a, p.b);
    std::vector<Real> inside;
    for (const Real& v : values)
      if (v > ilo && v < ihi) inside.push_back(v);
    if (inside.empty()) return {p};
    std::sort(inside.begin(), inside.end());
    inside.erase(std::unique(inside.begin(), inside.end()), inside.end());
    const bool inc = p.b > p.a;
    if (!inc) std::reverse(inside.begin(), inside.end());
    std::vector<Piece> out;
    Real x_prev = p.lo, y_prev = p.a;
    auto emit = [&](const Real& x, const Real& y) {
      if (x > x_prev) {
        Piece s = p;
        s.lo = x_prev;
        s.hi = x;
        s.a = y_prev;
        s.b = y;
        out.push_back(std::move(s));
      }
      x_prev = std::max(x_prev, x);
      y_prev = y;
    };
    for (const Real& v : inside) {
      Real x = pull(p, v);
      if (x < p.lo) x = p.lo;
      if (x > p.hi) x = p.hi;
      emit(x, v);
    }
    emit(p.hi, p.b);
    return out;
  }

  void apply_f(Piece& p) const {
    const Real mid = (p.a + p.b) / 2;
    const std::size_t sym = map_.branch_index_t(mid, Side::plus);
    const auto& f = map_.branches()[sym].formula;
    p.a = clamp01(f.value(p.a));
    p.b = clamp01(f.value(p.b));
    p.itin.push_back(static_cast<std::uint8_t>(sym));
    ++p.depth;
  }

  void finalize(Piece&& p, int tau, int b) {
    Cell c;
    c.left = p.lo;
    c.right = p.hi;
    c.image_left = p.a;
    c.image_right = p.b;
    c.tau = tau;
    c.b = b;
    c.l0 = p.l0 < 0 ? p_.q0 : p.l0;
    c.crit = p.crit;
    c.sign = p.b > p.a ? 1 : -1;
    c.itinerary = std::move(p.itin);
    cells_.push_back(std::move(c));
  }

  /// Forward check that the cell midpoint binds for exactly n steps; fails
  /// when the piece was carried by rounding rather than by the dynamics.
  bool escapes_at(const Piece& p, int n) const {
    Real x = (p.lo + p.hi) / 2;
    for (int k = 0; k < p.l0; ++k) x = map_.branches()[p.itin[k]].formula.value(x);
    for (int m = 1; m <= n; ++m) {
      x = map_.branches()[p.itin[p.l0 + m - 1]].formula.value(x);
      const bool out = abs(x - orbit_[p.crit][m]) > thresh_[p.crit][m];
      if (out != (m == n)) return false;
    }
    return true;
  }

  void unresolved(const Piece& p) {
    ledger_.unresolved += p.hi - p.lo;
    ++ledger_.unresolved_pieces;
  }

  void free_step(Piece&& p, std::vector<Piece>& stack) {
    if (p.depth == p_.q0) {
      finalize(std::move(p), p_.q0, 0);
      return;
    }
    if (p.a == p.b) {
      unresolved(p);
      return;
    }
    std::vector<Real> values = cuts_;
    values.insert(values.end(), delta_cuts_.begin(), delta_cuts_.end());
    auto subs = split(p, std::move(values));
    for (auto it = subs.rbegin(); it != subs.rend(); ++it) {
      Piece s = std::move(*it);
      const int k = map_.delta_owner((s.a + s.b) / 2, p_.delta);
      if (k >= 0) {
        s.l0 = s.depth;
        s.crit = k;
        apply_f(s);
        if (map_.critical_set()[k].singular()) {
          const int tau = s.depth;
          finalize(std::move(s), tau, 1);
        } else {
          stack.push_back(std::move(s));
        }
      } else {
        apply_f(s);
        stack.push_back(std::move(s));
      }
    }
  }

  void bind_step(Piece&& p, std::vector<Piece>& stack) {
    const int n = p.depth - p.l0;
    if (p.a == p.b) {
      unresolved(p);
      return;
    }
    const Real& v = orbit_[p.crit][n];
    const Real& t = thresh_[p.crit][n];
    std::vector<Real> values = {v - t, v + t};
    // Images this close to the critical value have lost the distance to c.
    const Real r = Real(1e4) * std::numeric_limits<Real>::epsilon() * std::max(Real(1), Real(abs(v)));
    if (n == 1) values.insert(values.end(), {v - r, v + r});
    auto subs = split(p, std::move(values));
    for (auto it = subs.rbegin(); it != subs.rend(); ++it) {
      Piece s = std::move(*it);
      const Real mid = (s.a + s.b) / 2;
      if (n == 1 && abs(mid - v) <= r) {
        unresolved(s);
        continue;
      }
      if (abs(mid - v) > t) {
        if (!escapes_at(s, n)) {
          unresolved(s);
          continue;
        }
        const int tau = s.depth;
        finalize(std::move(s), tau, n);
        continue;
      }
      if (s.depth >= p_.tau_max) {
        ledger_.truncated += s.hi - s.lo;
        ++ledger_.truncated_pieces;
        if (ledger_.min_truncated_b < 0 || n + 1 < ledger_.min_truncated_b)
          ledger_.min_truncated_b = n + 1;
        continue;
      }
      auto parts = split(s, cuts_);
      for (auto jt = parts.rbegin(); jt != parts.rend(); ++jt) {
        if (jt->a == jt->b) {
          unresolved(*jt);
          continue;
        }
        apply_f(*jt);
        stack.push_back(std::move(*jt));
      }
    }
  }

  const PiecewiseMap& map_;
  const InducingParams& p_;
  std::vector<std::vector<Real>> orbit_;
  std::vector<std::vector<Real>> thresh_;
  std::vector<Real> cuts_;
  std::vector<Real> delta_cuts_;
};

}  // namespace

// ---------------------------------------------------------------------------

CellOrbit::CellOrbit(const PiecewiseMap& map, const Cell& cell, int steps) {
  if (steps < 0) steps = cell.tau;
  base_.resize(steps + 1);
  jets_.resize(steps);
  Real e = cell.left;
  for (int j = 0; j < steps; ++j) {
    base_[j] = to_double(e);
    const auto& f = map.branches()[cell.itinerary[j]].formula;
    Jet& J = jets_[j];
    if (f.kind == BranchFormula::Kind::polynomial) {
      // Taylor coefficients at e by repeated synthetic division.
      std::vector<Real> c(f.coeffs.begin(), f.coeffs.end());
      const std::size_t n = c.size();
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = n - 1; i > k; --i) c[i - 1] += e * c[i];
      J.b.resize(n);
      for (std::size_t k = 0; k < n; ++k) J.b[k] = to_double(c[k]);
      if (n < 2) J.b.assign(2, 0.0);
    } else {
      J.power = true;
      const Real w = e - Real(f.anchor);
      J.w = to_double(w);
      J.scale = f.scale;
      J.stretch = f.stretch;
      J.exponent = f.exponent;
      J.fe = to_double(f.value(e) - Real(f.offset));
      J.d1 = to_double(f.deriv1(e));
    }
    e = f.value(e);
  }
  base_[steps] = to_double(e);
}

InducedScheme::InducedScheme(PiecewiseMap map, InducingParams params, std::vector<Cell> cells,
                             DiscardLedger ledger, std::vector<CriticalOrbitData> orbits)
    : map_(std::move(map)),
      params_(params),
      cells_(std::move(cells)),
      ledger_(std::move(ledger)),
      orbits_(std::move(orbits)) {
  Real cov = 0;
  for (const auto& c : cells_) {
    cov += c.right - c.left;
    max_tau_ = std::max(max_tau_, c.tau);
    left_d_.push_back(c.left_d());
  }
  coverage_ = to_double(cov);
}

std::optional<std::size_t> InducedScheme::find_cell(double y) const {
  if (!(y >= 0.0 && y <= 1.0)) return std::nullopt;
  const Real yr = Real(y);
  auto it = std::upper_bound(cells_.begin(), cells_.end(), yr,
                             [](const Real& v, const Cell& c) { return v < c.left; });
  if (it == cells_.begin()) return std::nullopt;
  --it;
  if (yr < it->right || (y == 1.0 && it->right == 1)) return static_cast<std::size_t>(it - cells_.begin());
  return std::nullopt;
}

std::size_t InducedScheme::cell_of(double y) const {
  const auto c = find_cell(y);
  if (!c) fail(ErrorCode::not_covered, "point " + std::to_string(y) + " lies in discarded mass");
  return *c;
}

InducedEval InducedScheme::induced_map_eval(double y) const {
  const std::size_t ci = cell_of(y);
  const Cell& c = cells_[ci];
  InducedEval r;
  Real x = Real(y);
  for (int k = 0; k < c.tau; ++k) {
    for (const auto& cp : map_.critical_set())
      if (x == Real(cp.location))
        fail(ErrorCode::singular_hit, "iterate lands exactly on " + cp.label());
    const std::size_t sym = map_.branch_index_t(x, Side::plus);
    if (sym != c.itinerary[k]) r.itinerary_matches = false;
    const auto& f = map_.branches()[sym].formula;
    r.log_abs_deriv += to_double(log(f.abs_deriv1(x)));
    x = f.value(x);
  }
  r.value = to_double(x);
  return r;
}

Real InducedScheme::iterate_on_cell(std::size_t cell, const Real& y, int j) const {
  const Cell& c = cells_[cell];
  Real x = y;
  for (int k = 0; k < j; ++k) x = map_.branches()[c.itinerary[k]].formula.value(x);
  return x;
}

Real InducedScheme::inverse_derivative(std::size_t cell, const Real& y) const {
  const Cell& c = cells_[cell];
  Real x = y;
  Real prod = 1;
  for (int k = 0; k < c.tau; ++k) {
    const auto& f = map_.branches()[c.itinerary[k]].formula;
    prod /= f.abs_deriv1(x);
    x = f.value(x);
  }
  return prod;
}

double InducedScheme::pull_back(std::size_t cell, double y, int steps) const {
  const Cell& c = cells_[cell];
  for (int k = steps - 1; k >= 0; --k) {
    const auto& br = map_.branches()[c.itinerary[k]];
    y = br.formula.inverse(y, br.left, br.right);
  }
  return std::clamp(y, c.left_d(), c.right_d());
}

double InducedScheme::max_inv_E(int b) const {
  if (b <= 0) return 1.0;
  double best = 0.0;
  bool any = false;
  for (const auto& o : orbits_) {
    if (o.singular()) continue;
    any = true;
    if (b > static_cast<int>(o.horizon)) continue;
    best = std::max(best, std::exp(-o.log_E[b]));
  }
  return any ? best : 1.0;
}

double InducedScheme::min_d(int b) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : orbits_)
    if (!o.singular() && b >= 1 && b <= static_cast<int>(o.horizon))
      best = std::min(best, std::exp(o.log_d[b]));
  return std::isfinite(best) ? best : 1.0;
}

int first_entry_time(const PiecewiseMap& map, double x, double delta, int q0) {
  if (!(x >= 0.0 && x <= 1.0)) fail(ErrorCode::domain, "first_entry_time: point outside [0,1]");
  Real y = Real(x);
  for (int j = 0; j < q0; ++j) {
    if (map.delta_owner(y, delta) >= 0) return j;
    y = clamp01(map.eval_t(y, Side::plus));
  }
  return q0;
}

BindingResult binding_period(const PiecewiseMap& map, const CriticalPoint& c, double x,
                             int b_max, double factor) {
  if (x == c.location) fail(ErrorCode::invalid_argument, "binding_period: x equals c");
  Real y = Real(x);
  Real v = Real(c.location);
  const auto crit = map.critical_set();
  y = clamp01(map.eval_t(y, c.side));
  v = clamp01(map.eval_t(v, c.side));
  for (int n = 1; n <= b_max; ++n) {
    Real d = std::numeric_limits<Real>::infinity();
    for (const auto& cc : crit) d = std::min(d, Real(abs(v - Real(cc.location))));
    if (abs(y - v) > Real(factor) * d) return {n, false};
    y = clamp01(map.eval_t(y, Side::plus));
    v = clamp01(map.eval_t(v, Side::plus));
  }
  return {b_max, true};
}

InducedScheme build_partition(const PiecewiseMap& map, const InducingParams& params) {
  if (!(params.delta > 0.0) || params.q0 < 1 || params.tau_max < 1 || !(params.refine_tol > 0.0) ||
      !(params.bind_factor > 0.0))
    fail(ErrorCode::invalid_argument, "build_partition: parameters must be positive, q0 >= 1");
  Builder builder(map, params);
  builder.run();
  std::vector<Cell> cells = std::move(builder.cells_);
  DiscardLedger ledger = std::move(builder.ledger_);
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) { return a.left < b.left; });

  std::vector<CriticalOrbitData> orbits;
  const std::size_t horizon = std::max<std::size_t>(200, 4 * static_cast<std::size_t>(params.tau_max));
  for (const auto& c : map.critical_set()) orbits.push_back(orbit_data(map, c, horizon));

  // Per-cell sup and variation of 1/|F'|.
  std::vector<SupVar> sv(cells.size());
  parallel_for(cells.size(), params.threads, [&](std::size_t i) {
    const Cell& c = cells[i];
    const CellOrbit orbit(map, c);
    auto g = [&](double offset) {
      double log_der = 0.0;
      orbit.walk(offset, [&](int, double, double der) { log_der += std::log(der); });
      return std::exp(-log_der);
    };
    sv[i] = adaptive_sup_var(c.length(), g, params.refine_tol, 1024);
  });
  std::vector<Cell> kept;
  kept.reserve(cells.size());
  std::size_t stat_fail = 0;
  Real stat_mass = 0;
  int stat_min_tau = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!sv[i].converged || !std::isfinite(sv[i].sup)) {
      ledger.unresolved += cells[i].right - cells[i].left;
      ++ledger.unresolved_pieces;
      ++stat_fail;
      stat_mass += cells[i].right - cells[i].left;
      if (stat_min_tau == 0 || cells[i].tau < stat_min_tau) stat_min_tau = cells[i].tau;
      continue;
    }
    cells[i].sup_inv = sv[i].sup;
    cells[i].var_inv = sv[i].var;
    kept.push_back(std::move(cells[i]));
  }
  if (stat_fail > 0) {
    std::ostringstream os;
    os << stat_fail << " cells discarded: 1/|F'| statistics unresolved at refine_tol="
       << params.refine_tol << " (smallest tau " << stat_min_tau << ", mass " << to_double(stat_mass)
       << ")";
    ledger.log.push_back(os.str());
  }
  if (ledger.truncated_pieces > 0) {
    std::ostringstream os;
    os << ledger.truncated_pieces << " bound pieces reached tau_max=" << params.tau_max
       << ", mass " << to_double(ledger.truncated);
    ledger.log.push_back(os.str());
  }
  if (ledger.unresolved_pieces > 0) {
    std::ostringstream os;
    os << ledger.unresolved_pieces << " pieces below extended-precision resolution, mass "
       << to_double(ledger.unresolved);
    ledger.log.push_back(os.str());
  }
  return InducedScheme(map, params, std::move(kept), std::move(ledger), std::move(orbits));
}

// ---------------------------------------------------------------------------

namespace {

double cell_log_E(const InducedScheme& s, const Cell& c, int n) {
  if (c.crit < 0 || n <= 0) return 0.0;
  const auto& o = s.orbits()[c.crit];
  if (n > static_cast<int>(o.horizon)) return std::numeric_limits<double>::infinity();
  return o.log_E[n];
}

}  // namespace

CellStatistics cell_statistics(const InducedScheme& scheme) {
  CellStatistics st;
  int max_b = 0;
  for (const auto& c : scheme.cells()) max_b = std::max(max_b, c.b);
  st.levels.resize(max_b + 1);
  for (int b = 0; b <= max_b; ++b) st.levels[b].b = b;
  for (const auto& c : scheme.cells()) {
    auto& row = st.levels[c.b];
    ++row.count;
    row.max_sup = std::max(row.max_sup, c.sup_inv);
    row.max_var = std::max(row.max_var, c.var_inv);
    row.sup_ratio = std::max(row.sup_ratio, c.sup_inv * std::exp(cell_log_E(scheme, c, c.b)));
    if (c.b >= 2 && c.crit >= 0 && !scheme.orbits()[c.crit].singular()) {
      const auto& o = scheme.orbits()[c.crit];
      const double ld = o.log_d[c.b - 1];
      const double log_denom = std::log1p(-ld) - ld - o.log_E[c.b - 1];
      row.var_ratio = std::max(row.var_ratio, c.var_inv * std::exp(-log_denom));
    }
  }
  for (const auto& row : st.levels) {
    st.M_hat = std::max(st.M_hat, static_cast<double>(row.count));
    st.C_sup = std::max(st.C_sup, row.sup_ratio);
    st.C_var = std::max(st.C_var, row.var_ratio);
  }
  st.C_hat = std::max(st.C_sup, st.C_var);
  return st;
}

FConditionSums F_condition_sums(const InducedScheme& scheme, double p) {
  return F_condition_sums(scheme, p, cell_statistics(scheme));
}

int first_discarded_level(const InducedScheme& scheme, const CellStatistics& st) {
  const bool has_binding = std::any_of(scheme.orbits().begin(), scheme.orbits().end(),
                                       [](const CriticalOrbitData& o) { return !o.singular(); });
  const auto& led = scheme.ledger();
  if (!has_binding || (led.truncated_pieces == 0 && led.unresolved_pieces == 0)) return -1;
  int b_lo = static_cast<int>(st.levels.size());
  if (led.truncated_pieces > 0) b_lo = std::min(b_lo, led.min_truncated_b);
  return std::max(1, b_lo);
}

FConditionSums F_condition_sums(const InducedScheme& scheme, double p, const CellStatistics& st) {
  FConditionSums r;
  r.p = p;
  for (const auto& c : scheme.cells()) {
    const double w = std::pow(static_cast<double>(c.tau), p);
    r.sup_sum += c.sup_inv * w;
    r.var_sum += c.var_inv * w;
  }
  const double q0 = scheme.params().q0;
  const double CM = st.C_hat * st.M_hat;
  const bool has_binding = std::any_of(scheme.orbits().begin(), scheme.orbits().end(),
                                       [](const CriticalOrbitData& o) { return !o.singular(); });
  int b_end = static_cast<int>(st.levels.size()) - 1;
  if (has_binding) b_end = static_cast<int>(scheme.orbits().front().horizon);
  for (int b = 0; b <= b_end; ++b)
    r.full_bound += CM * scheme.max_inv_E(b) * std::pow(b + q0, p);
  const int b_lo = first_discarded_level(scheme, st);
  if (b_lo >= 1)
    for (int b = b_lo; b <= b_end; ++b)
      r.tail_bound += CM * scheme.max_inv_E(b) * std::pow(b + q0, p);
  return r;
}

namespace {

double grid_mass(const std::vector<double>& h, double lo, double hi) {
  const std::size_t k = h.size();
  const double kd = static_cast<double>(k);
  auto idx = [&](double x) {
    return std::min<std::size_t>(k - 1, static_cast<std::size_t>(std::max(0.0, x) * kd));
  };
  const std::size_t i0 = idx(lo), i1 = idx(hi);
  if (i0 == i1) return h[i0] * (hi - lo);
  double m = h[i0] * ((i0 + 1) / kd - lo);
  for (std::size_t i = i0 + 1; i < i1; ++i) m += h[i] / kd;
  m += h[i1] * (hi - i1 / kd);
  return m;
}

}  // namespace

TauTail tau_distribution(const InducedScheme& scheme, TauWeight weight, const std::vector<double>* h) {
  if (weight == TauWeight::mu_Y && (!h || h->empty()))
    fail(ErrorCode::invalid_argument, "tau_distribution: mu_Y weighting needs a density");
  TauTail t;
  const auto& cells = scheme.cells();
  std::vector<double> w(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i)
    w[i] = weight == TauWeight::lebesgue ? cells[i].length()
                                         : grid_mass(*h, cells[i].left_d(), cells[i].right_d());
  for (double x : w) t.mass += x;
  if (weight == TauWeight::mu_Y && t.mass > 0)
    for (double& x : w) x /= t.mass;
  t.tail.assign(scheme.max_tau() + 1, 0.0);
  double m2 = 0, m3 = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const int tau = cells[i].tau;
    for (int n = 0; n < tau; ++n) t.tail[n] += w[i];
    t.mean += w[i] * tau;
    m2 += w[i] * tau * tau;
    m3 += w[i] * tau * tau * double(tau);
  }
  t.lp[0] = t.mean;
  t.lp[1] = std::sqrt(m2);
  t.lp[2] = std::cbrt(m3);
  if (weight == TauWeight::lebesgue) t.truncated = to_double(scheme.ledger().truncated);
  return t;
}

// ---------------------------------------------------------------------------

namespace {

// per_offset(orbit, offset) evaluates the observable at left + offset.
template <class Steps, class G>
void fill_cell_stats(const InducedScheme& s, WeightedObservable& out, Steps&& steps, G&& per_offset) {
  const auto& cells = s.cells();
  out.sup.assign(cells.size(), 0.0);
  out.var.assign(cells.size(), 0.0);
  parallel_for(cells.size(), s.params().threads, [&](std::size_t i) {
    const CellOrbit orbit(s.map(), cells[i], steps(i));
    auto g = [&](double offset) { return per_offset(orbit, offset); };
    const SupVar r = adaptive_sup_var(cells[i].length(), g, s.params().refine_tol, 256);
    out.sup[i] = r.sup;
    out.var[i] = r.var;
  });
}

}  // namespace

WeightedObservable induced_observable(const InducedScheme& scheme, const Observable& phi) {
  WeightedObservable w;
  w.name = "induced(" + phi.name + ")";
  const InducedScheme* s = &scheme;
  auto fn = phi.components[0];
  auto sum_on_cell = [s, fn](std::size_t ci, const Real& y) {
    const Cell& c = s->cells()[ci];
    Real x = y;
    double acc = 0.0;
    for (int k = 0; k < c.tau; ++k) {
      acc += fn(to_double(x));
      x = s->map().branches()[c.itinerary[k]].formula.value(x);
    }
    return acc;
  };
  w.eval = [s, sum_on_cell](double y) { return sum_on_cell(s->cell_of(y), Real(y)); };
  fill_cell_stats(
      scheme, w, [s](std::size_t ci) { return s->cells()[ci].tau; },
      [&fn](const CellOrbit& orbit, double offset) {
        double acc = 0.0;
        orbit.walk(offset, [&](int, double x, double) { acc += fn(x); });
        return acc;
      });
  return w;
}

WeightedObservable level_observable(const InducedScheme& scheme, const Observable& v,
                                    const std::vector<int>& j) {
  const auto& cells = scheme.cells();
  if (j.size() != cells.size())
    fail(ErrorCode::invalid_argument, "level_observable: one level per cell required");
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (j[i] < 0 || j[i] >= cells[i].tau)
      fail(ErrorCode::domain, "level_observable: level outside [0, tau) on cell " + std::to_string(i));
  WeightedObservable w;
  w.name = "level(" + v.name + ")";
  const InducedScheme* s = &scheme;
  auto fn = v.components[0];
  auto lv = std::make_shared<std::vector<int>>(j);
  auto at = [s, fn, lv](std::size_t ci, const Real& y) {
    return fn(to_double(s->iterate_on_cell(ci, y, (*lv)[ci])));
  };
  w.eval = [s, at](double y) { return at(s->cell_of(y), Real(y)); };
  fill_cell_stats(
      scheme, w, [&j](std::size_t ci) { return j[ci]; },
      [&fn](const CellOrbit& orbit, double offset) {
        const double d = orbit.walk(offset, [](int, double, double) {});
        return fn(orbit.base(orbit.steps()) + d);
      });
  return w;
}

WeightedObservable cell_constant(const InducedScheme& scheme, std::string name,
                                 const std::vector<double>& values) {
  if (values.size() != scheme.cells().size())
    fail(ErrorCode::invalid_argument, "cell_constant: one value per cell required");
  WeightedObservable w;
  w.name = std::move(name);
  const InducedScheme* s = &scheme;
  auto vals = std::make_shared<std::vector<double>>(values);
  w.eval = [s, vals](double y) { return (*vals)[s->cell_of(y)]; };
  w.sup.resize(values.size());
  w.var.assign(values.size(), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) w.sup[i] = std::abs(values[i]);
  return w;
}

double weighted_bv_norm(const InducedScheme& scheme, const WeightedObservable& psi) {
  const auto& cells = scheme.cells();
  if (psi.sup.size() != cells.size() || psi.var.size() != cells.size())
    fail(ErrorCode::invalid_argument, "weighted_bv_norm: per-cell data missing");
  double n = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i)
    n = std::max(n, (psi.sup[i] + psi.var[i]) / cells[i].tau);
  return n;
}

}  // namespace ergolab
