#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ergolab/map_model.hpp"

namespace ergolab {

/// Natural-log sequences along the orbit of a one-sided critical value.
/// Arrays are indexed by n = 0..N; index 0 holds conventions
/// (log_d[0] = log d(c, C) = -inf, log_D[0] = 0, log_E[0] = 0).
struct CriticalOrbitData {
  CriticalPoint point;
  std::size_t horizon = 0;
  std::vector<double> orbit;  // f^n c
  std::vector<double> log_d;
  std::vector<double> log_D;
  std::vector<double> log_E;
  bool degenerate = false;   // orbit hit the critical set
  std::size_t degenerate_at = 0;

  /// E_n is defined but carries no hypothesis for singular points.
  bool singular() const { return point.order < 1.0; }
  double log_dE(std::size_t n) const { return log_d[n] + log_E[n]; }
};

/// Orbit iterated in extended precision from the one-sided value f(c).
CriticalOrbitData orbit_data(const PiecewiseMap& map, const CriticalPoint& c, std::size_t N);

enum class Verdict { converging, diverging, inconclusive, not_applicable };
const char* verdict_name(Verdict v);

struct SummabilityReport {
  double p = 0.0;
  std::size_t N = 0;
  double S3 = 0.0;  // sum n^p d_n^-1 log(d_n^-1) E_n^-1
  double S4 = 0.0;  // sum n^p E_n^-1
  Verdict v3 = Verdict::inconclusive;
  Verdict v4 = Verdict::inconclusive;
  double ratio3 = 0.0, ratio4 = 0.0;  // geometric tail ratio
  double beta3 = 0.0, beta4 = 0.0;    // local power-law exponent of the tail
  std::vector<double> log_term3;      // index n = 1..N (index 0 unused)
  std::vector<double> log_term4;
};

SummabilityReport summability_report(const CriticalOrbitData& data, double p, std::size_t N);

/// Tail classification of a positive series given log terms for n = 1..N
/// (index 0 ignored).
Verdict classify_tail(std::span<const double> log_terms, double* ratio = nullptr,
                      double* beta = nullptr);

struct RecurrenceFit {
  double c0 = 0.0;
  double intercept = 0.0;
  double C0 = 0.0;
  double residual = 0.0;  // RMS of the log-linear fit
  bool success = false;
  bool hypothesis_fails = false;
};

/// Fit of log(d_n E_n) = log C + c n over n = 1..N.
RecurrenceFit exp_recurrence_fit(std::span<const double> log_dE);
RecurrenceFit exp_recurrence_check(const CriticalOrbitData& data);

}  // namespace ergolab
