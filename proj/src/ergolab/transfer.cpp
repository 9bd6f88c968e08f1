#include "ergolab/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "ergolab/error.hpp"
#include "ergolab/parallel.hpp"

namespace ergolab {

const char* operator_kind_name(OperatorKind k) {
  switch (k) {
    case OperatorKind::L_f: return "L_f";
    case OperatorKind::L_F: return "L_F";
    case OperatorKind::P_F: return "P_F";
  }
  return "?";
}

namespace {

using Triplet = Eigen::Triplet<double>;

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

std::size_t bin_of(double x, std::size_t k) {
  const double b = std::floor(x * static_cast<double>(k));
  if (!(b > 0.0)) return 0;
  return std::min<std::size_t>(k - 1, static_cast<std::size_t>(b));
}

// Bin just below y for a value approached from above.
std::size_t bin_below(double y, std::size_t k) {
  const double b = std::ceil(y * static_cast<double>(k)) - 1.0;
  if (!(b > 0.0)) return 0;
  return std::min<std::size_t>(k - 1, static_cast<std::size_t>(b));
}

SparseRM from_triplets(std::size_t k, const std::vector<Triplet>& t) {
  SparseRM m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

std::vector<double> row_sums(const SparseRM& m) {
  std::vector<double> r(static_cast<std::size_t>(m.rows()), 0.0);
  for (Eigen::Index i = 0; i < m.outerSize(); ++i)
    for (SparseRM::InnerIterator it(m, i); it; ++it) r[static_cast<std::size_t>(i)] += it.value();
  return r;
}

double max_abs_row_sum(const SparseRM& m) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < m.outerSize(); ++i) {
    double s = 0.0;
    for (SparseRM::InnerIterator it(m, i); it; ++it) s += std::abs(it.value());
    best = std::max(best, s);
  }
  return best;
}

/// Scales rows to unit mass; returns the scale factors (0 for empty rows).
std::vector<double> normalise_rows(UlamOperator& op, const std::vector<double>& mass) {
  std::vector<double> scale(op.k, 0.0);
  op.empty_row.assign(op.k, 0);
  std::size_t renormalised = 0, empty = 0;
  for (std::size_t i = 0; i < op.k; ++i) {
    if (!(mass[i] > 0.0)) {
      op.empty_row[i] = 1;
      ++empty;
      continue;
    }
    scale[i] = 1.0 / mass[i];
    const double c = std::abs(1.0 - mass[i]);
    op.max_correction = std::max(op.max_correction, c);
    if (c > 1e-12) ++renormalised;
  }
  if (renormalised > 0) {
    std::ostringstream os;
    os << "renormalised " << renormalised << " rows for discarded mass, max correction "
       << op.max_correction;
    op.log.push_back(os.str());
  }
  if (empty > 0) op.log.push_back(std::to_string(empty) + " empty rows excluded from spectral solves");
  return scale;
}

void scale_rows(SparseRM& m, const std::vector<double>& scale) {
  for (Eigen::Index i = 0; i < m.outerSize(); ++i)
    for (SparseRM::InnerIterator it(m, i); it; ++it) it.valueRef() *= scale[static_cast<std::size_t>(i)];
}

}  // namespace

// ---------------------------------------------------------------------------
// Assembly

UlamOperator ulam_matrix(const PiecewiseMap& map, std::size_t k) {
  if (k < 2) fail(ErrorCode::invalid_argument, "ulam_matrix: k must be >= 2");
  const double kd = static_cast<double>(k);
  std::vector<Triplet> trip;
  for (const auto& br : map.branches()) {
    const auto& f = br.formula;
    const double L = br.left, R = br.right;
    const double yL = clamp01(f.value(L)), yR = clamp01(f.value(R));
    const double ylo = std::min(yL, yR), yhi = std::max(yL, yR);
    std::vector<double> xs = {L, R};
    for (std::size_t i = bin_of(L, k); i <= bin_of(R, k); ++i) {
      const double g = static_cast<double>(i) / kd;
      if (g > L && g < R) xs.push_back(g);
    }
    for (std::size_t j = bin_of(ylo, k); j <= bin_of(yhi, k); ++j) {
      const double y = static_cast<double>(j) / kd;
      if (y > ylo && y < yhi) xs.push_back(std::clamp(f.inverse(y, L, R), L, R));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t s = 1; s < xs.size(); ++s) {
      const double x0 = xs[s - 1], x1 = xs[s];
      if (!(x1 > x0)) continue;
      const double xm = 0.5 * (x0 + x1);
      trip.emplace_back(static_cast<int>(bin_of(xm, k)), static_cast<int>(bin_of(clamp01(f.value(xm)), k)),
                        (x1 - x0) * kd);
    }
  }
  UlamOperator op;
  op.k = k;
  op.kind = OperatorKind::L_f;
  op.source = map.name();
  op.matrix = from_triplets(k, trip);
  const auto scale = normalise_rows(op, row_sums(op.matrix));
  scale_rows(op.matrix, scale);
  return op;
}

UlamOperator ulam_matrix(const InducedScheme& scheme, std::size_t k) {
  if (k < 2) fail(ErrorCode::invalid_argument, "ulam_matrix: k must be >= 2");
  if (scheme.coverage() < 0.95)
    fail(ErrorCode::domain, "ulam_matrix: scheme coverage below 0.95");
  const double kd = static_cast<double>(k);
  const auto& cells = scheme.cells();
  struct Entry {
    std::size_t i, j;
    double v;
  };
  std::vector<std::vector<Entry>> per(cells.size());
  parallel_for(cells.size(), scheme.params().threads, [&](std::size_t a) {
    const Cell& c = cells[a];
    auto& out = per[a];
    const double len = c.length();
    const double yl = to_double(c.image_left), yr = to_double(c.image_right);
    const double ylo = std::min(yl, yr), yhi = std::max(yl, yr);
    const double x0 = c.left_d(), x1 = c.right_d();
    if (len * kd < 1e-9 || bin_of(ylo, k) == bin_of(yhi, k) || !(x1 > x0)) {
      // Affine split of a cell carrying under 1e-9 of a row.
      const std::size_t i = bin_of(to_double((c.left + c.right) / 2), k);
      if (!(yhi > ylo)) {
        out.push_back({i, bin_of(ylo, k), len * kd});
        return;
      }
      for (std::size_t j = bin_of(ylo, k); j <= bin_of(yhi, k); ++j) {
        const double o = std::min(yhi, (j + 1) / kd) - std::max(ylo, j / kd);
        if (o > 0.0) out.push_back({i, j, len * kd * o / (yhi - ylo)});
      }
      return;
    }
    // Breakpoints (x, image bin from x on) in increasing x.
    std::vector<std::pair<double, std::size_t>> ev;
    const bool inc = c.sign > 0;
    ev.emplace_back(x0, inc ? bin_of(ylo, k) : bin_below(yhi, k));
    if (inc) {
      for (std::size_t j = bin_of(ylo, k) + 1; j <= bin_of(yhi, k); ++j) {
        const double y = j / kd;
        if (y > ylo && y < yhi) ev.emplace_back(scheme.pull_back(a, y), j);
      }
    } else {
      for (std::size_t j = bin_below(yhi, k); j > bin_of(ylo, k); --j) {
        const double y = j / kd;
        if (y > ylo && y < yhi) ev.emplace_back(scheme.pull_back(a, y), j - 1);
      }
    }
    for (std::size_t e = 1; e < ev.size(); ++e) ev[e].first = std::max(ev[e].first, ev[e - 1].first);
    std::vector<double> grid;
    for (std::size_t i = bin_of(x0, k) + 1; i <= bin_of(x1, k); ++i) {
      const double g = i / kd;
      if (g > x0 && g < x1) grid.push_back(g);
    }
    // Merge the two breakpoint lists.
    std::size_t e = 1, g = 0;
    double x = x0;
    std::size_t jb = ev[0].second;
    std::size_t ib = bin_of(x0, k);
    while (true) {
      const double nx_e = e < ev.size() ? ev[e].first : x1;
      const double nx_g = g < grid.size() ? grid[g] : x1;
      const double nx = std::min({nx_e, nx_g, x1});
      if (nx > x) out.push_back({ib, jb, (nx - x) * kd});
      x = std::max(x, nx);
      if (e >= ev.size() && g >= grid.size()) break;
      if (e < ev.size() && nx_e <= nx_g) {
        jb = ev[e].second;
        ++e;
      } else {
        ib = bin_of(grid[g], k);
        ++g;
      }
    }
    if (x < x1) out.push_back({ib, jb, (x1 - x) * kd});
  });

  std::map<int, std::vector<Triplet>> by;
  std::vector<Triplet> all;
  std::vector<double> mass(k, 0.0);
  for (std::size_t a = 0; a < cells.size(); ++a) {
    auto& tr = by[cells[a].tau];
    for (const auto& en : per[a]) {
      tr.emplace_back(static_cast<int>(en.i), static_cast<int>(en.j), en.v);
      all.emplace_back(static_cast<int>(en.i), static_cast<int>(en.j), en.v);
      mass[en.i] += en.v;
    }
  }
  UlamOperator op;
  op.k = k;
  op.kind = OperatorKind::L_F;
  op.source = scheme.map().name() + " induced";
  op.truncation = scheme.ledger().loss();
  op.matrix = from_triplets(k, all);
  const auto scale = normalise_rows(op, mass);
  scale_rows(op.matrix, scale);
  for (auto& [tau, tr] : by) {
    op.taus.push_back(tau);
    op.by_tau.push_back(from_triplets(k, tr));
    scale_rows(op.by_tau.back(), scale);
  }
  return op;
}

UlamOperator conjugate_operator(const UlamOperator& L, const std::vector<double>& h) {
  if (L.kind == OperatorKind::P_F) fail(ErrorCode::invalid_argument, "conjugate_operator: needs an L operator");
  if (h.size() != L.k) fail(ErrorCode::invalid_argument, "conjugate_operator: density size mismatch");
  auto transpose_conj = [&](const SparseRM& M) {
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(M.nonZeros()));
    for (Eigen::Index i = 0; i < M.outerSize(); ++i)
      for (SparseRM::InnerIterator it(M, i); it; ++it) {
        const auto j = static_cast<std::size_t>(it.col());
        if (h[j] > 0.0)
          t.emplace_back(static_cast<int>(j), static_cast<int>(i), it.value() * h[static_cast<std::size_t>(i)] / h[j]);
      }
    return from_triplets(L.k, t);
  };
  UlamOperator op;
  op.k = L.k;
  op.kind = OperatorKind::P_F;
  op.source = L.source;
  op.truncation = L.truncation;
  op.taus = L.taus;
  op.density = h;
  op.lebesgue = L.matrix;
  op.matrix = transpose_conj(L.matrix);
  const auto scale = normalise_rows(op, row_sums(op.matrix));
  scale_rows(op.matrix, scale);
  for (const auto& part : L.by_tau) {
    op.by_tau.push_back(transpose_conj(part));
    scale_rows(op.by_tau.back(), scale);
  }
  return op;
}

std::vector<std::tuple<std::size_t, std::size_t, double>> triplets(const SparseRM& m) {
  std::vector<std::tuple<std::size_t, std::size_t, double>> out;
  for (Eigen::Index i = 0; i < m.outerSize(); ++i)
    for (SparseRM::InnerIterator it(m, i); it; ++it)
      out.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(it.col()), it.value());
  return out;
}

// ---------------------------------------------------------------------------
// Spectral solves

namespace {

/// Strongly connected components of the retained graph (iterative Tarjan).
std::vector<int> components(const SparseRM& m, const std::vector<char>& skip, int* count) {
  const auto n = static_cast<std::size_t>(m.rows());
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<char> on(n, 0);
  std::vector<std::size_t> st;
  int next = 0, nc = 0;
  struct Frame {
    std::size_t v;
    SparseRM::InnerIterator it;
  };
  for (std::size_t s = 0; s < n; ++s) {
    if (skip[s] || index[s] >= 0) continue;
    std::vector<Frame> call;
    auto open = [&](std::size_t v) {
      index[v] = low[v] = next++;
      st.push_back(v);
      on[v] = 1;
      call.push_back({v, SparseRM::InnerIterator(m, static_cast<Eigen::Index>(v))});
    };
    open(s);
    while (!call.empty()) {
      Frame& fr = call.back();
      bool descended = false;
      for (; fr.it; ++fr.it) {
        const auto w = static_cast<std::size_t>(fr.it.col());
        if (skip[w] || !(fr.it.value() > 0.0)) continue;
        if (index[w] < 0) {
          ++fr.it;
          open(w);
          descended = true;
          break;
        }
        if (on[w]) low[fr.v] = std::min(low[fr.v], index[w]);
      }
      if (descended) continue;
      const std::size_t v = fr.v;
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
      if (low[v] == index[v]) {
        while (true) {
          const std::size_t w = st.back();
          st.pop_back();
          on[w] = 0;
          comp[w] = nc;
          if (w == v) break;
        }
        ++nc;
      }
    }
  }
  *count = nc;
  return comp;
}

struct Block {
  std::vector<char> mask;  // nodes carrying the fixed vector
  bool reducible = false;
  std::vector<std::string> log;
};

Block retained_block(const UlamOperator& op) {
  Block b;
  const std::size_t n = op.k;
  std::vector<char> skip = op.empty_row;
  if (skip.size() != n) skip.assign(n, 0);
  int nc = 0;
  const auto comp = components(op.matrix, skip, &nc);
  std::vector<char> closed(static_cast<std::size_t>(nc), 1);
  std::vector<std::size_t> size(static_cast<std::size_t>(nc), 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (skip[i]) continue;
    ++size[static_cast<std::size_t>(comp[i])];
    for (SparseRM::InnerIterator it(op.matrix, static_cast<Eigen::Index>(i)); it; ++it) {
      const auto j = static_cast<std::size_t>(it.col());
      if (it.value() > 0.0 && !skip[j] && comp[j] != comp[i]) closed[static_cast<std::size_t>(comp[i])] = 0;
    }
  }
  int n_closed = 0, best = -1;
  for (int c = 0; c < nc; ++c)
    if (closed[static_cast<std::size_t>(c)]) {
      ++n_closed;
      if (best < 0 || size[static_cast<std::size_t>(c)] > size[static_cast<std::size_t>(best)]) best = c;
    }
  b.reducible = nc > 1;
  b.mask.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) b.mask[i] = !skip[i] && comp[i] == best;
  if (n_closed > 1)
    b.log.push_back("reducible: " + std::to_string(n_closed) + " closed classes; using the largest (" +
                    std::to_string(size[static_cast<std::size_t>(best)]) + " cells)");
  else if (nc > 1)
    b.log.push_back("reducible: " + std::to_string(nc - 1) + " transient classes carry no invariant mass");
  return b;
}

void fill_density_norms(SpectralReport& r) {
  r.h_bv = grid_bv_norm(r.h);
  const double k = static_cast<double>(r.h.size());
  bool positive = true;
  std::vector<double> inv(r.h.size());
  double integral = 0.0;
  for (std::size_t i = 0; i < r.h.size(); ++i) {
    if (!(r.h[i] > 0.0)) {
      positive = false;
      break;
    }
    inv[i] = 1.0 / r.h[i];
    integral += inv[i] / k;
  }
  r.inv_h_bv = positive ? grid_bv_norm(inv) : std::numeric_limits<double>::infinity();
  r.inv_h_integral = positive ? integral : std::numeric_limits<double>::infinity();
}

}  // namespace

SpectralReport invariant_density(const UlamOperator& op, double tol, std::size_t max_iter) {
  SpectralReport r;
  const std::size_t n = op.k;
  Block b = retained_block(op);
  r.reducible = b.reducible;
  r.log = b.log;
  r.retained = static_cast<std::size_t>(std::count(b.mask.begin(), b.mask.end(), 1));
  if (r.retained == 0) fail(ErrorCode::domain, "invariant_density: no retained cells");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    if (b.mask[i]) v[static_cast<Eigen::Index>(i)] = 1.0 / static_cast<double>(r.retained);
  const SparseRM Mt = op.matrix.transpose();
  const std::size_t lazy_after = 1000;
  std::size_t it = 0;
  double res = std::numeric_limits<double>::infinity();
  for (; it < max_iter; ++it) {
    Eigen::VectorXd w = Mt * v;
    for (std::size_t i = 0; i < n; ++i)
      if (!b.mask[i]) w[static_cast<Eigen::Index>(i)] = 0.0;
    const double s = w.sum();
    if (!(s > 0.0)) fail(ErrorCode::domain, "invariant_density: mass vanished");
    w /= s;
    res = (w - v).lpNorm<1>();
    if (it >= lazy_after) w = 0.5 * (w + v);
    v = w;
    if (res < tol) break;
  }
  r.iterations = it + 1;
  r.residual = res;
  r.approximate = !(res < tol);
  if (r.approximate) r.log.push_back("power iteration did not reach tolerance; residual " + std::to_string(res));
  r.lambda1 = 1.0;
  r.h.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.h[i] = std::max(0.0, v[static_cast<Eigen::Index>(i)]) * static_cast<double>(n);
  fill_density_norms(r);
  return r;
}

SpectralReport spectral_gap(const UlamOperator& op, int n_eigs) {
  SpectralReport r = invariant_density(op);
  const std::size_t n = op.k;
  std::vector<std::size_t> idx;
  std::vector<char> skip = op.empty_row;
  if (skip.size() != n) skip.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (!skip[i]) idx.push_back(i);
  const std::size_t m = idx.size();
  std::vector<std::complex<double>> ev;
  double tol_one = 1e-8;
  if (m <= 512) {
    std::vector<long> pos(n, -1);
    for (std::size_t a = 0; a < m; ++a) pos[idx[a]] = static_cast<long>(a);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t a = 0; a < m; ++a)
      for (SparseRM::InnerIterator it(op.matrix, static_cast<Eigen::Index>(idx[a])); it; ++it)
        if (pos[static_cast<std::size_t>(it.col())] >= 0)
          D(static_cast<Eigen::Index>(a), pos[static_cast<std::size_t>(it.col())]) = it.value();
    Eigen::EigenSolver<Eigen::MatrixXd> es(D, false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) ev.push_back(es.eigenvalues()[i]);
  } else {
    // Block subspace iteration on v -> vM with the fixed direction removed.
    tol_one = 1e-6;
    const auto N = static_cast<Eigen::Index>(n);
    const Eigen::Index s = std::max(2, n_eigs) + 4;
    Eigen::VectorXd pi(N);
    for (Eigen::Index i = 0; i < N; ++i) pi[i] = r.h[static_cast<std::size_t>(i)] / static_cast<double>(n);
    const SparseRM Mt = op.matrix.transpose();
    auto apply = [&](const Eigen::MatrixXd& X) {
      Eigen::MatrixXd Y = Mt * X;
      for (Eigen::Index c = 0; c < X.cols(); ++c) Y.col(c) -= X.col(c).sum() * pi;
      return Y;
    };
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd X(N, s);
    for (Eigen::Index i = 0; i < N; ++i)
      for (Eigen::Index c = 0; c < s; ++c) X(i, c) = nd(rng);
    auto orth = [&](const Eigen::MatrixXd& Y) {
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(Y);
      return Eigen::MatrixXd(qr.householderQ() * Eigen::MatrixXd::Identity(N, s));
    };
    X = orth(X);
    double prev = -1.0;
    std::vector<std::complex<double>> ritz;
    for (int iter = 1; iter <= 5000; ++iter) {
      X = orth(apply(X));
      if (iter % 5 != 0) continue;
      const Eigen::MatrixXd B = X.transpose() * apply(X);
      Eigen::EigenSolver<Eigen::MatrixXd> es(B, false);
      ritz.clear();
      double top = 0.0;
      for (Eigen::Index i = 0; i < B.rows(); ++i) {
        ritz.push_back(es.eigenvalues()[i]);
        top = std::max(top, std::abs(es.eigenvalues()[i]));
      }
      if (std::abs(top - prev) < 1e-9) break;
      prev = top;
    }
    ev.push_back(1.0);
    ev.insert(ev.end(), ritz.begin(), ritz.end());
  }
  std::sort(ev.begin(), ev.end(), [](auto a, auto b) { return std::abs(a) > std::abs(b); });
  r.multiplicity = 0;
  r.peripheral = 0;
  std::size_t one = ev.size();
  for (std::size_t i = 0; i < ev.size(); ++i) {
    if (std::abs(ev[i] - 1.0) < tol_one) {
      ++r.multiplicity;
      if (one == ev.size()) one = i;
    }
    if (std::abs(ev[i]) > 1.0 - tol_one) ++r.peripheral;
  }
  r.lambda1 = ev.empty() ? 0.0 : std::abs(ev[0]);
  r.gamma_hat = 0.0;
  for (std::size_t i = 0; i < ev.size(); ++i)
    if (i != one) r.gamma_hat = std::max(r.gamma_hat, std::abs(ev[i]));
  r.non_mixing = r.multiplicity != 1 || r.peripheral > 1;
  if (r.non_mixing) r.log.push_back("eigenvalue 1 not simple or peripheral spectrum present (non-mixing)");
  const std::size_t keep = std::min<std::size_t>(ev.size(), static_cast<std::size_t>(std::max(1, n_eigs)));
  r.eigenvalues.assign(ev.begin(), ev.begin() + static_cast<long>(keep));
  return r;
}

double grid_bv_norm(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double sup = 0.0, var = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sup = std::max(sup, std::abs(v[i]));
    if (i > 0) var += std::abs(v[i] - v[i - 1]);
  }
  return sup + var;
}

double l1_to_exact(const std::vector<double>& h, const std::function<double(double)>& pdf,
                   const std::function<double(double)>& cdf) {
  const double k = static_cast<double>(h.size());
  double total = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double a = i / k, b = (i + 1) / k, c = h[i];
    auto part = [&](double lo, double hi) { return std::abs(cdf(hi) - cdf(lo) - c * (hi - lo)); };
    const double pa = pdf(a) - c, pb = pdf(b) - c;
    if (!(pa * pb < 0.0)) {
      total += part(a, b);
      continue;
    }
    double lo = a, hi = b;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      if ((pdf(mid) - c) * pa > 0.0) lo = mid;
      else hi = mid;
    }
    const double x = 0.5 * (lo + hi);
    total += part(a, x) + part(x, b);
  }
  return total;
}

double l1_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) fail(ErrorCode::invalid_argument, "l1_distance: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

std::vector<double> coarsen(const std::vector<double>& h, std::size_t k) {
  if (k == 0 || h.size() % k != 0) fail(ErrorCode::invalid_argument, "coarsen: k must divide the grid size");
  const std::size_t f = h.size() / k;
  std::vector<double> out(k, 0.0);
  for (std::size_t i = 0; i < h.size(); ++i) out[i / f] += h[i] / static_cast<double>(f);
  return out;
}

// ---------------------------------------------------------------------------
// Tower pushdown

TowerMeasure pushdown_measure(const InducedScheme& scheme, const std::vector<double>& h,
                              std::size_t k_out, double mass_cutoff) {
  if (h.empty() || k_out < 1) fail(ErrorCode::invalid_argument, "pushdown_measure: empty grid");
  const std::size_t kY = h.size();
  const auto& cells = scheme.cells();
  auto integrate = [&](double x0, double x1) {
    double s = 0.0;
    for (std::size_t i = bin_of(x0, kY); i <= bin_of(x1, kY); ++i) {
      const double lo = std::max(x0, i / double(kY)), hi = std::min(x1, (i + 1) / double(kY));
      if (hi > lo) s += h[i] * (hi - lo);
    }
    return s;
  };
  constexpr std::size_t kChunks = 64;
  std::vector<std::vector<double>> acc(kChunks, std::vector<double>(k_out, 0.0));
  std::vector<double> chunk_dropped(kChunks, 0.0), chunk_mass(kChunks, 0.0), chunk_tau(kChunks, 0.0);
  parallel_for(kChunks, scheme.params().threads, [&](std::size_t ch) {
    auto& out = acc[ch];
    const std::size_t begin = cells.size() * ch / kChunks, end = cells.size() * (ch + 1) / kChunks;
    for (std::size_t a = begin; a < end; ++a) {
      const Cell& c = cells[a];
      const double len = c.length();
      const double x0 = c.left_d(), x1 = c.right_d();
      const double mass = bin_of(x0, kY) == bin_of(x1, kY) ? len * h[bin_of(x0, kY)] : integrate(x0, x1);
      if (!(mass > mass_cutoff)) {
        chunk_dropped[ch] += mass;
        continue;
      }
      chunk_mass[ch] += mass;
      chunk_tau[ch] += mass * c.tau;
      const double img = std::abs(to_double(c.image_right - c.image_left));
      const double by_size = std::ceil(2.0 * img * static_cast<double>(k_out)) + 1.0;
      const double by_mass = std::ceil(mass * 1e7) + 1.0;
      const auto m = static_cast<std::size_t>(std::min({by_size, by_mass, 1e6}));
      const CellOrbit orbit(scheme.map(), c);
      std::vector<double> w(m);
      double wsum = 0.0;
      for (std::size_t s = 0; s < m; ++s) {
        w[s] = h[bin_of(x0 + len * (s + 0.5) / m, kY)];
        wsum += w[s];
      }
      if (!(wsum > 0.0)) continue;
      for (std::size_t s = 0; s < m; ++s) {
        const double ws = mass * w[s] / wsum;
        orbit.walk(len * (s + 0.5) / m, [&](int, double x, double) { out[bin_of(x, k_out)] += ws; });
      }
    }
  });
  TowerMeasure t;
  t.mu_Y = h;
  std::vector<double> dens(k_out, 0.0);
  double total = 0.0, mass = 0.0, tau = 0.0;
  for (std::size_t ch = 0; ch < kChunks; ++ch) {
    for (std::size_t i = 0; i < k_out; ++i) dens[i] += acc[ch][i];
    t.dropped += chunk_dropped[ch];
    mass += chunk_mass[ch];
    tau += chunk_tau[ch];
  }
  for (double d : dens) total += d;
  if (!(total > 0.0)) fail(ErrorCode::domain, "pushdown_measure: no mass pushed");
  for (auto& d : dens) d *= static_cast<double>(k_out) / total;
  t.density = std::move(dens);
  t.mean_tau = tau / mass;
  return t;
}

// ---------------------------------------------------------------------------
// Renewal family

Eigen::MatrixXcd RenewalFamily::evaluate(std::complex<double> z) const {
  const auto K = static_cast<Eigen::Index>(k);
  Eigen::MatrixXcd R = Eigen::MatrixXcd::Zero(K, K);
  if (n.empty()) return R;
  std::size_t pos = n.size();
  for (int m = n.back(); m >= 1; --m) {
    R *= z;
    if (pos > 0 && n[pos - 1] == m) {
      --pos;
      const SparseRM& Pm = P[pos];
      for (Eigen::Index i = 0; i < Pm.outerSize(); ++i)
        for (SparseRM::InnerIterator it(Pm, i); it; ++it) R(i, it.col()) += it.value();
    }
  }
  return R * z;
}

RenewalFamily renewal_operators(const UlamOperator& op_P, int tau_max) {
  if (op_P.kind != OperatorKind::P_F || op_P.by_tau.empty())
    fail(ErrorCode::invalid_argument, "renewal_operators: needs the P operator of a scheme");
  RenewalFamily f;
  f.k = op_P.k;
  f.truncation = op_P.truncation;
  for (std::size_t i = 0; i < f.k; ++i)
    if (i >= op_P.empty_row.size() || !op_P.empty_row[i]) f.active.push_back(i);
  SparseRM sum(static_cast<Eigen::Index>(f.k), static_cast<Eigen::Index>(f.k));
  for (std::size_t i = 0; i < op_P.taus.size(); ++i) {
    if (op_P.taus[i] > tau_max) continue;
    f.n.push_back(op_P.taus[i]);
    f.P.push_back(op_P.by_tau[i]);
    f.norms.push_back(max_abs_row_sum(op_P.by_tau[i]));
    sum += op_P.by_tau[i];
  }
  const SparseRM diff = sum - op_P.matrix;
  f.completeness = max_abs_row_sum(diff);
  return f;
}

RenewalCheck renewal_spectrum_check(const RenewalFamily& family,
                                    const std::vector<std::complex<double>>& z, double tol) {
  RenewalCheck rc;
  const auto K = static_cast<Eigen::Index>(family.active.size());
  if (K == 0) fail(ErrorCode::domain, "renewal_spectrum_check: no active cells");
  int g = 0;
  for (int n : family.n) g = std::gcd(g, n);
  for (const auto& zz : z) {
    if (std::abs(zz) > 1.0 + 1e-12) fail(ErrorCode::domain, "renewal_spectrum_check: |z| > 1");
    const Eigen::MatrixXcd Pz = family.evaluate(zz);
    Eigen::MatrixXcd A(K, K);
    for (Eigen::Index a = 0; a < K; ++a)
      for (Eigen::Index b = 0; b < K; ++b)
        A(a, b) = (a == b ? 1.0 : 0.0) - Pz(static_cast<Eigen::Index>(family.active[a]),
                                              static_cast<Eigen::Index>(family.active[b]));
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(A);
    const auto& sv = svd.singularValues();
    RenewalPoint p;
    p.z = zz;
    p.sigma_min = sv[K - 1];
    p.sigma_next = K > 1 ? sv[K - 2] : sv[K - 1];
    const bool at_one = std::abs(zz - 1.0) < 1e-12;
    if (at_one) {
      rc.simple_at_one = p.sigma_min < 1e-8 && p.sigma_next > tol;
      Eigen::EigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd::Identity(K, K) - A.real(), false);
      std::vector<double> mod;
      for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) mod.push_back(std::abs(es.eigenvalues()[i]));
      std::sort(mod.rbegin(), mod.rend());
      rc.gamma_at_one = mod.size() > 1 ? mod[1] : 0.0;
    } else if (p.sigma_min < tol) {
      p.flagged = true;
      rc.mixing_failure = true;
      std::ostringstream os;
      os << "1 in spectrum of P(z) at z = " << zz.real() << (zz.imag() < 0 ? "" : "+") << zz.imag() << "i";
      if (g > 1 && std::abs(std::pow(zz, g) - 1.0) < 1e-9)
        os << " (z^" << g << " = 1: return times share the period " << g << ", non-mixing tower)";
      rc.log.push_back(os.str());
    }
    rc.points.push_back(p);
  }
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < family.n.size(); ++i)
    if (family.norms[i] > 0.0) {
      xs.push_back(family.n[i]);
      ys.push_back(std::log(family.norms[i]));
    }
  if (xs.size() >= 2) {
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
    }
    rc.decay_slope = sxx > 0.0 ? sxy / sxx : 0.0;
  }
  return rc;
}

// ---------------------------------------------------------------------------
// Branch sums

TailNormSums tail_norm_sums(const InducedScheme& scheme, double p) {
  return tail_norm_sums(scheme, p, cell_statistics(scheme));
}

TailNormSums tail_norm_sums(const InducedScheme& scheme, double p, const CellStatistics& st) {
  TailNormSums r;
  r.p = p;
  int max_tau = 0;
  for (const auto& c : scheme.cells()) max_tau = std::max(max_tau, c.tau);
  std::vector<double> w(static_cast<std::size_t>(max_tau) + 1, 0.0);  // w[t] = sum_{n<t} n^(p-1)
  for (int t = 2; t <= max_tau; ++t) w[t] = w[t - 1] + std::pow(t - 1.0, p - 1.0);
  for (const auto& c : scheme.cells()) {
    r.sup_sum += c.sup_inv * w[c.tau];
    r.var_sum += c.var_inv * w[c.tau];
  }
  const int b_lo = first_discarded_level(scheme, st);
  if (b_lo >= 1) {
    const int q0 = scheme.params().q0;
    const int b_end = static_cast<int>(scheme.orbits().front().horizon);
    std::vector<double> tail(static_cast<std::size_t>(b_end) + 2, 0.0);  // sum_{b >= m} E_b^-1
    for (int b = b_end; b >= 0; --b) tail[b] = tail[b + 1] + scheme.max_inv_E(b);
    const double CM = st.C_hat * st.M_hat;
    for (int n = 1; n <= b_end + q0; ++n) {
      const int from = std::max(b_lo, n - q0 + 1);
      if (from > b_end) break;
      r.tail_bound += std::pow(n, p - 1.0) * CM * tail[from];
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Twisted operators and the Gordin decomposition

std::vector<double> grid_values(const UlamOperator& op, const InducedScheme& scheme,
                                const WeightedObservable& phi) {
  std::vector<double> v(op.k, 0.0);
  std::vector<char> ok(op.k, 0);
  for (std::size_t i = 0; i < op.k; ++i) {
    const double x = op.midpoint(i);
    if (scheme.find_cell(x)) {
      v[i] = phi.eval(x);
      ok[i] = 1;
    }
  }
  // Midpoints in discarded mass take the nearest covered value.
  for (std::size_t i = 0; i < op.k; ++i) {
    if (ok[i]) continue;
    for (std::size_t d = 1; d < op.k; ++d) {
      if (i >= d && ok[i - d]) {
        v[i] = v[i - d];
        break;
      }
      if (i + d < op.k && ok[i + d]) {
        v[i] = v[i + d];
        break;
      }
    }
  }
  return v;
}

std::vector<TwistedOperator> twisted_operator(const UlamOperator& op_L, const std::vector<double>& phi,
                                              const std::vector<double>& t) {
  if (phi.size() != op_L.k) fail(ErrorCode::invalid_argument, "twisted_operator: grid size mismatch");
  const auto rs = row_sums(op_L.matrix);
  std::vector<TwistedOperator> out;
  for (double tt : t) {
    TwistedOperator T;
    T.t = tt;
    std::vector<std::complex<double>> mult(op_L.k);
    for (std::size_t i = 0; i < op_L.k; ++i) mult[i] = std::polar(1.0, tt * phi[i]);
    T.matrix = op_L.matrix.cast<std::complex<double>>();
    for (Eigen::Index i = 0; i < T.matrix.outerSize(); ++i)
      for (CSparseRM::InnerIterator it(T.matrix, i); it; ++it) it.valueRef() *= mult[static_cast<std::size_t>(i)];
    double row = 0.0, var = 0.0;
    for (std::size_t i = 0; i < op_L.k; ++i) {
      row = std::max(row, std::abs(mult[i] - 1.0) * rs[i]);
      if (i > 0) var += std::abs(mult[i] - mult[i - 1]);
    }
    T.surrogate = row + var;
    out.push_back(std::move(T));
  }
  return out;
}

GordinResult gordin_solve(const UlamOperator& op_P, std::vector<double> phi, double tol,
                          std::size_t max_terms) {
  if (op_P.kind != OperatorKind::P_F || op_P.density.size() != op_P.k)
    fail(ErrorCode::invalid_argument, "gordin_solve: needs a P operator with its density");
  if (phi.size() != op_P.k) fail(ErrorCode::invalid_argument, "gordin_solve: grid size mismatch");
  const auto K = static_cast<Eigen::Index>(op_P.k);
  const double kd = static_cast<double>(op_P.k);
  Eigen::VectorXd h(K);
  for (Eigen::Index i = 0; i < K; ++i) h[i] = op_P.density[static_cast<std::size_t>(i)];
  auto mean = [&](const Eigen::VectorXd& v) { return h.dot(v) / kd; };
  auto l2 = [&](const Eigen::VectorXd& v) { return std::sqrt(h.dot(v.cwiseProduct(v)) / kd); };
  Eigen::VectorXd f = Eigen::Map<Eigen::VectorXd>(phi.data(), K);
  GordinResult g;
  g.removed_mean = mean(f);
  f.array() -= g.removed_mean;

  Eigen::VectorXd chi = Eigen::VectorXd::Zero(K);
  Eigen::VectorXd u = op_P.matrix * f;
  const Eigen::VectorXd Pf = u;
  for (g.terms = 1; g.terms <= max_terms; ++g.terms) {
    u.array() -= mean(u);
    chi += u;
    g.truncation = u.lpNorm<Eigen::Infinity>();
    if (g.truncation < tol) {
      g.converged = true;
      break;
    }
    u = op_P.matrix * u;
  }
  // P(chi o F) = chi, so P Phi_hat = P Phi - chi + P chi.
  const Eigen::VectorXd Pchi = op_P.matrix * chi;
  const Eigen::VectorXd kernel = Pf - chi + Pchi;
  const Eigen::VectorXd chiF = op_P.lebesgue * chi;
  const Eigen::VectorXd phat = f - chiF + chi;
  g.residual = l2(kernel);
  g.phi_hat_norm = l2(phat);
  g.koopman_residual = l2(op_P.matrix * phat);
  g.chi.assign(chi.data(), chi.data() + K);
  g.phi_hat.assign(phat.data(), phat.data() + K);
  return g;
}

}  // namespace ergolab
