#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ergolab/critical_orbits.hpp"
#include "ergolab/map_model.hpp"
#include "ergolab/observable.hpp"

namespace ergolab {

struct InducingParams {
  double delta = 0.05;
  int q0 = 10;
  int tau_max = 60;
  double refine_tol = 1e-3;
  double bind_factor = 0.5;  // escape threshold factor times d_n(c)
  std::size_t max_cells = 4'000'000;
  unsigned threads = 0;
};

struct Cell {
  Real left, right;
  Real image_left, image_right;  // F(left), F(right)
  int tau = 0;
  int b = 0;
  int l0 = 0;     // first entry time, q0 for free cells
  int crit = -1;  // critical point bound to, -1 for free cells
  int sign = 1;   // sign of F'
  std::vector<std::uint8_t> itinerary;
  double sup_inv = 0.0;  // sup of 1/|F'|
  double var_inv = 0.0;  // variation of 1/|F'|

  double left_d() const { return to_double(left); }
  double right_d() const { return to_double(right); }
  double length() const { return to_double(right - left); }
};

/// Orbit of a cell's left endpoint in extended precision plus the exact
/// local expansion of every step, so that points of the cell are iterated
/// as double offsets from the endpoint orbit without losing its resolution.
class CellOrbit {
 public:
  CellOrbit(const PiecewiseMap& map, const Cell& cell, int steps = -1);

  int steps() const { return static_cast<int>(jets_.size()); }
  double base(int j) const { return base_[j]; }

  /// Calls fn(j, x_j, |f'(x_j)|) for j < steps() where x_j = f^j(left + offset);
  /// returns f^steps(left + offset) - f^steps(left).
  template <class Fn>
  double walk(double offset, Fn&& fn) const;

 private:
  struct Jet {
    bool power = false;
    std::vector<double> b;  // b[k] = p^(k)(e)/k!, k >= 1
    double w = 0.0;         // e - anchor
    double fe = 0.0;        // scale * |stretch * w|^exponent
    double d1 = 0.0;        // f'(e)
    double scale = 0.0, stretch = 0.0, exponent = 1.0;
  };
  std::vector<double> base_;
  std::vector<Jet> jets_;
};

template <class Fn>
double CellOrbit::walk(double d, Fn&& fn) const {
  using std::abs;
  for (int j = 0; j < steps(); ++j) {
    const Jet& J = jets_[j];
    double next, der;
    if (!J.power) {
      next = 0.0;
      der = 0.0;
      for (std::size_t k = J.b.size(); k-- > 1;) {
        next = next * d + J.b[k];
        der = der * d + double(k) * J.b[k];
      }
      next *= d;
    } else if (J.w == 0.0) {
      const double u = std::abs(J.stretch * d);
      next = (u == 0.0) ? 0.0 : J.scale * std::pow(u, J.exponent);
      der = (u == 0.0) ? (J.exponent < 1.0 ? std::numeric_limits<double>::infinity() : 0.0)
                       : J.scale * J.exponent * std::abs(J.stretch) * std::pow(u, J.exponent - 1.0);
    } else {
      const double l = std::log1p(d / J.w);
      next = J.fe * std::expm1(J.exponent * l);
      der = J.d1 * std::exp((J.exponent - 1.0) * l);
    }
    fn(j, base_[j] + d, std::abs(der));
    d = next;
  }
  return d;
}

struct DiscardLedger {
  Real truncated = 0;   // bound beyond tau_max
  Real unresolved = 0;  // below extended-precision resolution
  std::size_t truncated_pieces = 0;
  std::size_t unresolved_pieces = 0;
  int min_truncated_b = -1;  // smallest binding level reached by truncated mass
  std::vector<std::string> log;

  double loss() const { return to_double(truncated + unresolved); }
};

struct InducedEval {
  double value = 0.0;
  double log_abs_deriv = 0.0;
  bool itinerary_matches = true;
};

class InducedScheme {
 public:
  InducedScheme(PiecewiseMap map, InducingParams params, std::vector<Cell> cells,
                DiscardLedger ledger, std::vector<CriticalOrbitData> orbits);

  const PiecewiseMap& map() const { return map_; }
  const InducingParams& params() const { return params_; }
  const std::vector<Cell>& cells() const { return cells_; }
  const DiscardLedger& ledger() const { return ledger_; }
  /// Orbit data per critical point, horizon at least 2 * tau_max.
  const std::vector<CriticalOrbitData>& orbits() const { return orbits_; }

  double coverage() const { return coverage_; }
  int max_tau() const { return max_tau_; }

  std::optional<std::size_t> find_cell(double y) const;
  /// Throws not_covered when y lies in discarded mass.
  std::size_t cell_of(double y) const;
  int return_time(double y) const { return cells_[cell_of(y)].tau; }

  /// F(y) = f^tau(y) and log|F'(y)| by direct iteration of f.
  InducedEval induced_map_eval(double y) const;

  /// f^j along the cell itinerary, in extended precision.
  Real iterate_on_cell(std::size_t cell, const Real& y, int j) const;
  /// 1/|F'(y)| along the cell itinerary.
  Real inverse_derivative(std::size_t cell, const Real& y) const;
  /// Preimage in the cell of a point of F(cell), computed in double.
  double pull_back(std::size_t cell, double y, int steps) const;
  double pull_back(std::size_t cell, double y) const { return pull_back(cell, y, cells_[cell].tau); }

  /// max over critical points of E_b^{-1}, with E_0 = 1.
  double max_inv_E(int b) const;
  /// d_b for the first critical point (all shipped maps share one orbit).
  double min_d(int b) const;

 private:
  PiecewiseMap map_;
  InducingParams params_;
  std::vector<Cell> cells_;
  std::vector<double> left_d_;
  DiscardLedger ledger_;
  std::vector<CriticalOrbitData> orbits_;
  double coverage_ = 0.0;
  int max_tau_ = 0;
};

/// min{j >= 0 : f^j x in Delta}, or q0 when no entry happens before q0.
int first_entry_time(const PiecewiseMap& map, double x, double delta, int q0);

struct BindingResult {
  int b = 0;
  bool capped = false;
};

/// min{n >= 1 : |f^n x - f^n c| > factor * d_n(c)}, capped at b_max.
BindingResult binding_period(const PiecewiseMap& map, const CriticalPoint& c, double x,
                             int b_max, double factor = 0.5);

InducedScheme build_partition(const PiecewiseMap& map, const InducingParams& params);

// ---------------------------------------------------------------------------
// Statistics over the partition

struct LevelRow {
  int b = 0;
  std::size_t count = 0;
  double max_sup = 0.0;
  double max_var = 0.0;
  double sup_ratio = 0.0;  // max sup * E_b
  double var_ratio = 0.0;  // max var / ((1 + log d_{b-1}^-1) d_{b-1}^-1 E_{b-1}^-1), b >= 2
};

struct CellStatistics {
  std::vector<LevelRow> levels;
  double M_hat = 0.0;
  double C_hat = 0.0;
  double C_sup = 0.0;
  double C_var = 0.0;
};

CellStatistics cell_statistics(const InducedScheme& scheme);

struct FConditionSums {
  double p = 0.0;
  double sup_sum = 0.0;  // (F1_p) partial sum
  double var_sum = 0.0;  // (F2_p) partial sum
  double tail_bound = 0.0;  // C M sum over discarded levels of E_b^-1 (b+q0)^p
  double full_bound = 0.0;  // C M sum over all levels
};

/// Smallest binding level that may hold discarded mass, or -1 when nothing
/// was discarded or no critical point binds.
int first_discarded_level(const InducedScheme& scheme, const CellStatistics& st);

FConditionSums F_condition_sums(const InducedScheme& scheme, double p);
FConditionSums F_condition_sums(const InducedScheme& scheme, double p, const CellStatistics& st);

enum class TauWeight { lebesgue, mu_Y };

struct TauTail {
  std::vector<double> tail;  // tail[n] = mu(tau > n), n = 0..max_tau
  double mass = 0.0;         // total retained weight before normalisation
  double mean = 0.0;
  double lp[3] = {0, 0, 0};  // L^1, L^2, L^3 norms of tau
  double truncated = 0.0;    // weight with tau > tau_max (Lebesgue only)
};

/// Lebesgue tails are unnormalised cell lengths; mu_Y tails use the grid
/// density `h` (k cells on [0,1]) normalised over retained cells.
TauTail tau_distribution(const InducedScheme& scheme, TauWeight weight,
                         const std::vector<double>* h = nullptr);

// ---------------------------------------------------------------------------
// Weighted observables on the partition

struct WeightedObservable {
  std::string name;
  std::function<double(double)> eval;  // Psi(y); valid while the scheme lives
  std::vector<double> sup;             // per cell sup |Psi|
  std::vector<double> var;             // per cell variation
};

/// Phi(y) = sum_{l < tau(y)} phi(f^l y).
WeightedObservable induced_observable(const InducedScheme& scheme, const Observable& phi);
/// v(f^{j(a)} y) on each cell a.
WeightedObservable level_observable(const InducedScheme& scheme, const Observable& v,
                                    const std::vector<int>& j);
/// Psi constant on cells with the given values.
WeightedObservable cell_constant(const InducedScheme& scheme, std::string name,
                                 const std::vector<double>& values);

double weighted_bv_norm(const InducedScheme& scheme, const WeightedObservable& psi);

}  // namespace ergolab
