#include "ergolab/map_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ergolab/kv_text.hpp"
#include "ergolab/parallel.hpp"
#include "ergolab/rng.hpp"

namespace ergolab {

BranchFormula BranchFormula::polynomial(std::vector<double> c) {
  BranchFormula f;
  f.kind = Kind::polynomial;
  while (c.size() > 1 && c.back() == 0.0) c.pop_back();
  if (c.empty()) c.push_back(0.0);
  f.coeffs = std::move(c);
  return f;
}

BranchFormula BranchFormula::power(double offset, double scale, double stretch,
                                   double anchor, double exponent) {
  if (!(exponent > 0.0)) fail(ErrorCode::invalid_argument, "power exponent must be positive");
  if (stretch == 0.0 || scale == 0.0)
    fail(ErrorCode::invalid_argument, "power branch with zero scale or stretch is constant");
  BranchFormula f;
  f.kind = Kind::power;
  f.offset = offset;
  f.scale = scale;
  f.stretch = stretch;
  f.anchor = anchor;
  f.exponent = exponent;
  return f;
}

std::string CriticalPoint::label() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "c%g%s", location, side_symbol(side));
  return buf;
}

PiecewiseMap::PiecewiseMap(std::string name, std::vector<Branch> branches,
                           std::vector<CriticalPoint> critical_set)
    : name_(std::move(name)), branches_(std::move(branches)), critical_(std::move(critical_set)) {
  if (branches_.empty()) fail(ErrorCode::invalid_argument, name_ + ": map has no branches");
  std::sort(branches_.begin(), branches_.end(),
            [](const Branch& a, const Branch& b) { return a.left < b.left; });
  double total = 0.0;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    auto& br = branches_[i];
    if (!(br.right > br.left))
      fail(ErrorCode::invalid_argument, name_ + ": branch " + std::to_string(i) + " is empty");
    if (i > 0 && std::abs(br.left - branches_[i - 1].right) > 1e-12)
      fail(ErrorCode::invalid_argument,
           name_ + ": branches " + std::to_string(i - 1) + " and " + std::to_string(i) +
               " leave a gap or overlap");
    total += br.right - br.left;
  }
  if (std::abs(branches_.front().left) > 1e-12 || std::abs(branches_.back().right - 1.0) > 1e-12 ||
      std::abs(total - 1.0) > 1e-12)
    fail(ErrorCode::invalid_argument, name_ + ": branches do not cover [0,1]");
  branches_.front().left = 0.0;
  branches_.back().right = 1.0;
  for (std::size_t i = 1; i < branches_.size(); ++i) branches_[i].left = branches_[i - 1].right;

  constexpr int kSamples = 1000;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    auto& br = branches_[i];
    int sign = 0;
    for (int s = 0; s < kSamples; ++s) {
      const double x = br.left + (br.right - br.left) * (s + 0.5) / kSamples;
      const double d = br.formula.deriv1(x);
      const double v = br.formula.value(x);
      if (!(v >= -1e-12 && v <= 1.0 + 1e-12))
        fail(ErrorCode::invalid_argument,
             name_ + ": branch " + std::to_string(i) + " leaves [0,1] near x=" + std::to_string(x));
      const int sd = (d > 0) - (d < 0);
      if (sd == 0) continue;
      if (sign == 0) sign = sd;
      if (sd != sign)
        fail(ErrorCode::invalid_argument,
             name_ + ": branch " + std::to_string(i) + " is not monotone");
    }
    if (sign == 0)
      fail(ErrorCode::invalid_argument, name_ + ": branch " + std::to_string(i) + " is constant");
    br.increasing = sign > 0;
  }

  for (const auto& c : critical_) {
    if (!(c.order > 0.0) || c.order == 1.0)
      fail(ErrorCode::invalid_argument, name_ + ": critical order must be positive and != 1");
    if (!(c.location >= 0.0 && c.location <= 1.0))
      fail(ErrorCode::invalid_argument, name_ + ": critical location outside [0,1]");
    if ((c.side == Side::plus && c.location >= 1.0) || (c.side == Side::minus && c.location <= 0.0))
      fail(ErrorCode::invalid_argument, name_ + ": " + c.label() + " has no neighbourhood in [0,1]");
  }
  for (std::size_t i = 1; i < branches_.size(); ++i) cuts_.push_back(branches_[i].left);
  for (const auto& c : critical_)
    if (c.location > 0.0 && c.location < 1.0) cuts_.push_back(c.location);
  std::sort(cuts_.begin(), cuts_.end());
  cuts_.erase(std::unique(cuts_.begin(), cuts_.end()), cuts_.end());
}

std::size_t PiecewiseMap::branch_index(double x, Side side) const {
  return branch_index_t<double>(x, side);
}

std::size_t PiecewiseMap::locate(double x) const {
  if (branches_.size() <= 4) {
    for (std::size_t i = 0; i + 1 < branches_.size(); ++i)
      if (x < branches_[i].right) return i;
    return branches_.size() - 1;
  }
  std::size_t lo = 0, hi = branches_.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (x < branches_[mid].right)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

double PiecewiseMap::eval(double x, Side side) const {
  double y = branches_[branch_index(x, side)].formula.value(x);
  return std::clamp(y, 0.0, 1.0);
}

double PiecewiseMap::derivative(double x, int order, Side side) const {
  if (order != 1 && order != 2) fail(ErrorCode::invalid_argument, "derivative order must be 1 or 2");
  for (const auto& c : critical_)
    if (x == c.location)
      fail(ErrorCode::one_sided_limit,
           "derivative requested exactly at " + c.label() + "; use a one-sided limit");
  const auto& f = branches_[branch_index(x, side)].formula;
  return order == 1 ? f.deriv1(x) : f.deriv2(x);
}

double PiecewiseMap::distance_to_critical(double x) const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& c : critical_) d = std::min(d, std::abs(x - c.location));
  return d;
}

// ---------------------------------------------------------------------------

PiecewiseMap builtin_map(std::string_view name, const BuiltinParams& params) {
  if (name == "doubling") {
    PiecewiseMap m("doubling",
                   {{0.0, 0.5, BranchFormula::polynomial({0.0, 2.0}), true},
                    {0.5, 1.0, BranchFormula::polynomial({-1.0, 2.0}), true}},
                   {});
    m.mark_binary_shift();
    return m;
  }
  if (name == "ulam") {
    const auto f = BranchFormula::polynomial({0.0, 4.0, -4.0});
    return PiecewiseMap("ulam", {{0.0, 0.5, f, true}, {0.5, 1.0, f, false}},
                        {{0.5, Side::minus, 2.0}, {0.5, Side::plus, 2.0}});
  }
  if (name == "cusp") {
    const double g = params.gamma;
    if (!(g > 0.5 && g < 1.0))
      fail(ErrorCode::invalid_argument, "cusp exponent gamma must lie in (1/2, 1)");
    const auto f = BranchFormula::power(1.0, -1.0, 2.0, 0.5, g);
    char nm[48];
    std::snprintf(nm, sizeof nm, "cusp(%g)", g);
    return PiecewiseMap(nm, {{0.0, 0.5, f, true}, {0.5, 1.0, f, false}},
                        {{0.5, Side::minus, g}, {0.5, Side::plus, g}});
  }
  fail(ErrorCode::invalid_argument, "unknown builtin map '" + std::string(name) + "'");
}

PiecewiseMap parse_map_text(std::string_view text, std::string_view source) {
  const auto doc = parse_kv(text, source);
  std::string name;
  bool have_version = false;
  std::vector<Branch> branches;
  std::vector<CriticalPoint> crit;
  for (const auto& e : doc.entries) {
    if (!e.section.empty()) parse_error(source, e.line, "map files have no sections");
    if (e.key == "schema_version") {
      if (parse_int(e.value, source, e.line, "schema_version") != 1)
        parse_error(source, e.line, "field 'schema_version': only version 1 is supported");
      have_version = true;
    } else if (e.key == "name") {
      if (e.value.empty()) parse_error(source, e.line, "field 'name': empty");
      name = e.value;
    } else if (e.key == "branch") {
      const auto tok = split_ws(e.value);
      if (tok.size() < 4)
        parse_error(source, e.line, "field 'branch': expected '<left> <right> <kind> <params...>'");
      Branch br;
      br.left = parse_double(tok[0], source, e.line, "branch.left");
      br.right = parse_double(tok[1], source, e.line, "branch.right");
      std::vector<double> p;
      for (std::size_t i = 3; i < tok.size(); ++i)
        p.push_back(parse_double(tok[i], source, e.line, "branch.param" + std::to_string(i - 3)));
      if (tok[2] == "poly") {
        br.formula = BranchFormula::polynomial(p);
      } else if (tok[2] == "power") {
        if (p.size() != 5)
          parse_error(source, e.line,
                      "field 'branch': power needs <offset> <scale> <stretch> <anchor> <exponent>");
        try {
          br.formula = BranchFormula::power(p[0], p[1], p[2], p[3], p[4]);
        } catch (const Error& err) {
          parse_error(source, e.line, std::string("field 'branch': ") + err.what());
        }
      } else {
        parse_error(source, e.line, "field 'branch.kind': expected 'poly' or 'power', got '" +
                                        tok[2] + "'");
      }
      branches.push_back(std::move(br));
    } else if (e.key == "critical") {
      const auto tok = split_ws(e.value);
      if (tok.size() != 3)
        parse_error(source, e.line, "field 'critical': expected '<location> <plus|minus> <order>'");
      CriticalPoint c;
      c.location = parse_double(tok[0], source, e.line, "critical.location");
      if (tok[1] == "plus" || tok[1] == "+")
        c.side = Side::plus;
      else if (tok[1] == "minus" || tok[1] == "-")
        c.side = Side::minus;
      else
        parse_error(source, e.line, "field 'critical.side': expected plus or minus");
      c.order = parse_double(tok[2], source, e.line, "critical.order");
      crit.push_back(c);
    } else {
      parse_error(source, e.line, "unknown key '" + e.key + "'");
    }
  }
  if (!have_version) parse_error(source, 0, "missing schema_version");
  if (name.empty()) parse_error(source, 0, "missing name");
  if (branches.empty()) parse_error(source, 0, "no branch lines");
  try {
    return PiecewiseMap(name, std::move(branches), std::move(crit));
  } catch (const Error& err) {
    parse_error(source, 0, err.what());
  }
}

PiecewiseMap load_map_file(const std::string& path) {
  return parse_map_text(read_text_file(path), path);
}

// ---------------------------------------------------------------------------

namespace {

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

RatioBounds summarize(const std::vector<double>& logd, const std::vector<double>& ratios) {
  RatioBounds rb;
  rb.min = *std::min_element(ratios.begin(), ratios.end());
  rb.max = *std::max_element(ratios.begin(), ratios.end());
  std::vector<double> lr;
  lr.reserve(ratios.size());
  bool finite = true;
  for (double r : ratios) {
    if (!(r > 0.0) || !std::isfinite(r)) finite = false;
    lr.push_back(std::log(r));
  }
  rb.log_slope = finite ? ls_slope(logd, lr) : std::numeric_limits<double>::infinity();
  return rb;
}

}  // namespace

OrderReport verify_order(const PiecewiseMap& map, const CriticalPoint& c, double delta,
                         std::size_t n_samples) {
  if (!(delta > 0.0)) fail(ErrorCode::invalid_argument, "verify_order: delta must be positive");
  if (n_samples < 2) fail(ErrorCode::invalid_argument, "verify_order: need at least 2 samples");
  const std::size_t bi = map.branch_index(c.location, c.side);
  const auto& br = map.branches()[bi];
  const double sgn = c.side == Side::plus ? 1.0 : -1.0;
  const double far = c.location + sgn * delta;
  if (far < br.left || far > br.right)
    fail(ErrorCode::invalid_argument,
         "verify_order: Delta(" + c.label() + ", delta) is not inside one branch");

  OrderReport rep;
  rep.point = c;
  rep.delta = delta;
  const Real cr = Real(c.location);
  const Real fc = br.formula.value(cr);
  const double l = c.order;
  // Log-spaced distances from delta down to delta * 1e-8.
  constexpr double kDecades = 8.0;
  std::vector<double> logd, r0, r1, r2;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double t = kDecades * static_cast<double>(i) / static_cast<double>(n_samples - 1);
    const double d = delta * std::pow(10.0, -t);
    const Real x = cr + Real(sgn) * Real(d);
    const Real dd = abs(x - cr);
    const double ld = std::log(to_double(dd));
    rep.distances.push_back(to_double(dd));
    logd.push_back(ld);
    const Real v = abs(br.formula.value(x) - fc);
    const Real d1 = abs(br.formula.deriv1(x));
    const Real d2 = abs(br.formula.deriv2(x));
    r0.push_back(to_double(v / pow(dd, Real(l))));
    r1.push_back(to_double(d1 / pow(dd, Real(l - 1.0))));
    r2.push_back(to_double(d2 / pow(dd, Real(l - 2.0))));
  }
  rep.value = summarize(logd, r0);
  rep.first = summarize(logd, r1);
  rep.second = summarize(logd, r2);

  constexpr double kSlopeTol = 0.1;
  std::ostringstream diag;
  auto check = [&](const RatioBounds& rb, const char* what) {
    const bool bad = !(rb.min > 0.0) || !std::isfinite(rb.max) || !(std::abs(rb.log_slope) <= kSlopeTol);
    if (bad) {
      rep.mismatch = true;
      diag << what << " ratio drifts (log-log slope " << rb.log_slope << ", range [" << rb.min
           << ", " << rb.max << "]); ";
    }
  };
  check(rep.value, "|f(x)-f(c)|/d^l");
  check(rep.first, "|f'(x)|/d^(l-1)");
  check(rep.second, "|f''(x)|/d^(l-2)");
  if (rep.mismatch)
    rep.diagnostic = "order mismatch at " + c.label() + " (declared order " +
                     std::to_string(l) + "): " + diag.str();
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

struct OrbitSegments {
  std::vector<double> min_log;  // by length n, +inf if none
  std::vector<std::size_t> count;
  double kappa_log = std::numeric_limits<double>::infinity();
  double kappa_x = 0.0;
  std::size_t segments = 0;
};

}  // namespace

ExpansionReport verify_expansion(const PiecewiseMap& map, double delta, std::size_t horizon,
                                 std::size_t n_orbits, std::uint64_t seed) {
  if (horizon < 1) fail(ErrorCode::invalid_argument, "verify_expansion: horizon must be >= 1");
  if (!(delta > 0.0)) fail(ErrorCode::invalid_argument, "verify_expansion: delta must be positive");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<OrbitSegments> per(n_orbits);
  parallel_for(n_orbits, 0, [&](std::size_t k) {
    StreamRng rng(seed, k);
    OrbitSegments& out = per[k];
    out.min_log.assign(horizon, inf);
    out.count.assign(horizon, 0);
    double x = rng.open_uniform();
    double start = x;
    double acc = 0.0;
    std::size_t len = 0;
    for (std::size_t step = 0; step < horizon; ++step) {
      if (map.delta_owner(x, delta) >= 0) {
        if (len > 0 && acc < out.kappa_log) {
          out.kappa_log = acc;
          out.kappa_x = start;
        }
        if (len > 0) ++out.segments;
        len = 0;
        acc = 0.0;
        x = map.eval_unchecked(x);
        if (!(x > 0.0 && x < 1.0)) x = rng.open_uniform();
        start = x;
        continue;
      }
      acc += std::log(map.abs_deriv_unchecked(x));
      ++len;
      out.min_log[len - 1] = std::min(out.min_log[len - 1], acc);
      ++out.count[len - 1];
      x = map.eval_unchecked(x);
      // Exact hits on the boundary would freeze a floating-point orbit on a
      // fixed point; restart the segment from a fresh random point instead.
      if (!(x > 0.0 && x < 1.0)) {
        if (len > 0) ++out.segments;
        len = 0;
        acc = 0.0;
        x = rng.open_uniform();
        start = x;
      }
    }
    if (len > 0) ++out.segments;
  });

  ExpansionReport rep;
  rep.delta = delta;
  rep.min_log_deriv.assign(horizon, inf);
  rep.counts.assign(horizon, 0);
  double kappa_log = inf;
  for (const auto& o : per) {
    for (std::size_t n = 0; n < horizon; ++n) {
      rep.min_log_deriv[n] = std::min(rep.min_log_deriv[n], o.min_log[n]);
      rep.counts[n] += o.count[n];
    }
    if (o.kappa_log < kappa_log) {
      kappa_log = o.kappa_log;
      rep.kappa_witness = o.kappa_x;
    }
    rep.segments += o.segments;
  }
  rep.kappa_vacuous = !std::isfinite(kappa_log);
  rep.kappa = rep.kappa_vacuous ? inf : std::exp(kappa_log);

  constexpr std::size_t kMinCount = 10;
  std::vector<double> ns, ys;
  for (std::size_t n = 0; n < horizon; ++n)
    if (rep.counts[n] >= kMinCount && std::isfinite(rep.min_log_deriv[n])) {
      ns.push_back(static_cast<double>(n + 1));
      ys.push_back(rep.min_log_deriv[n]);
    }
  if (ns.size() < 2) {
    rep.inconclusive = true;
    return rep;
  }
  rep.lambda = ls_slope(ns, ys);
  double logc = inf;
  for (std::size_t i = 0; i < ns.size(); ++i) logc = std::min(logc, ys[i] - rep.lambda * ns[i]);
  rep.c_delta = std::exp(logc);
  return rep;
}

}  // namespace ergolab
