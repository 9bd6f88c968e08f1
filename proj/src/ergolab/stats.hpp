#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ergolab/map_model.hpp"
#include "ergolab/observable.hpp"
#include "ergolab/rng.hpp"
#include "ergolab/transfer.hpp"

namespace ergolab {

enum class InitialLaw { lebesgue, density };

struct Ensemble {
  PiecewiseMap map;
  std::size_t N = 20000;
  std::size_t n = 10000;
  std::size_t burn_in = 1000;
  std::uint64_t seed = 1;
  InitialLaw law = InitialLaw::lebesgue;
  std::vector<double> density;  // grid density for InitialLaw::density
  unsigned threads = 0;
};

/// One orbit of the ensemble. Orbits of binary-shift maps are exact: the bit
/// shifted out is replaced by a fresh random bit, so the orbit is that of a
/// Lebesgue-typical real. Other maps iterate in double and restart from a
/// fresh point when the orbit lands on 0 or 1.
class OrbitStream {
 public:
  OrbitStream(const Ensemble& e, std::uint64_t index);

  double x() const { return x_; }
  void step();
  std::size_t restarts() const { return restarts_; }

 private:
  void reseed();
  const PiecewiseMap& map_;
  const Ensemble& ens_;
  StreamRng rng_;
  bool shift_ = false;
  std::uint64_t m_ = 0;
  std::uint64_t pool_ = 0;
  int pool_bits_ = 0;
  double x_ = 0.0;
  std::size_t restarts_ = 0;
};

struct BirkhoffOptions {
  std::size_t acf_lags = 30;      // n_max for Green-Kubo
  std::size_t acf_window = 2000;  // steps per orbit used for autocorrelations
  std::size_t batches = 20;
  std::optional<double> mean;     // centering constant; estimated when absent
};

struct BirkhoffRun {
  double mean = 0.0;                 // centering constant used
  bool mean_estimated = true;
  std::vector<double> samples;       // n^-1/2 phi_n per orbit
  std::vector<double> path_max;      // max_t W_n(t)
  std::vector<double> path_integral; // integral of W_n over [0,1]
  std::vector<double> acf;           // autocovariance, lags 0..acf_lags
  double sigma2_batch = 0.0;
  std::size_t acf_samples = 0;       // points per lag behind acf
  std::size_t restarts = 0;
};

BirkhoffRun run_birkhoff(const Ensemble& e, const ScalarFn& phi, const BirkhoffOptions& opt = {});

/// n^-1/2 phi_n per orbit.
std::vector<double> birkhoff_samples(const Ensemble& e, const ScalarFn& phi, double* mean = nullptr);

struct GreenKubo {
  double sigma2 = 0.0;
  double head = 0.0;        // acf(0) + 2 sum_{1..n_max} acf
  double tail = 0.0;        // fitted tail beyond n_max
  bool undefined = false;   // fitted decay not summable
};

GreenKubo green_kubo_from_acf(const std::vector<double>& acf, double noise_floor);
GreenKubo green_kubo_sigma(const Ensemble& e, const ScalarFn& phi, std::size_t n_max,
                           std::optional<double> mean = std::nullopt);

double normal_cdf(double x, double variance = 1.0);
/// P(max_{[0,1]} W <= c) for standard Brownian motion.
double brownian_max_cdf(double c);
/// sup |F_N - F| over the sample.
double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf);
/// Asymptotic Kolmogorov p-value.
double ks_pvalue(double d, std::size_t n);

struct Moments {
  double mean = 0.0, variance = 0.0, skewness = 0.0, kurtosis = 0.0;
};
Moments moments(const std::vector<double>& v);

struct CLTReport {
  double sigma2_gk = 0.0;
  double sigma2_batch = 0.0;
  double gk_tail = 0.0;
  bool undefined_variance = false;
  double ks = 0.0;
  double ks_pvalue = 0.0;
  double threshold = 0.05;
  bool degenerate = false;
  bool pass = false;
  Moments moments;
  double centering = 0.0;
};

/// KS test of samples against N(0, sigma2); sigma2 <= 1e-12 switches to a
/// boundedness test (sample variance below 0.01).
CLTReport clt_test(const std::vector<double>& samples, double sigma2, double threshold = 0.05);
CLTReport clt_report(const BirkhoffRun& run, double threshold = 0.05);

struct FCLTReport {
  double sigma2 = 0.0;
  double ks_end = 0.0;       // W_n(1) / sigma against N(0,1)
  double ks_max = 0.0;       // max W_n / sigma against 2 Phi(c) - 1
  double ks_integral = 0.0;  // integral of W_n / sigma against N(0, 1/3)
  double threshold = 0.05;
  bool pass = false;
};

FCLTReport fclt_paths(const BirkhoffRun& run, double sigma2, double threshold = 0.05);

enum class CorrelationMethod { monte_carlo, op };

struct DecayReport {
  std::vector<double> rho;      // rho(n), n = 0..n_max
  std::vector<double> stderr_;  // Monte Carlo standard errors (empty for the operator method)
  double noise_floor = 0.0;
  double mean_v = 0.0, mean_w = 0.0;
  std::size_t samples = 0;      // points per lag
};

struct CorrelationOptions {
  std::size_t window = 50000;   // steps per orbit after burn-in
  std::size_t grid = 4096;      // operator grid
};

DecayReport correlation(const Ensemble& e, const ScalarFn& v, const ScalarFn& w, std::size_t n_max,
                        CorrelationMethod method, const CorrelationOptions& opt = {});

enum class FitKind { exponential, polynomial, too_fast, insufficient };
const char* fit_kind_name(FitKind k);

struct DecayFit {
  FitKind kind = FitKind::insufficient;
  double rate = 0.0;        // c for exponential, beta for polynomial
  double r2 = 0.0;
  double exp_rate = 0.0, exp_r2 = 0.0, exp_intercept = 0.0;
  double poly_beta = 0.0, poly_r2 = 0.0, poly_intercept = 0.0;
  std::size_t usable = 0;
};

/// Fits |rho(n)| for n = n0 + i above the noise floor; needs 10 usable points.
DecayFit decay_fit(const std::vector<double>& rho, double noise_floor, std::size_t n0 = 0);

struct Envelope {
  std::vector<double> value;  // sum_{j > delta n} mu(tau > j) + n mu(tau > delta n) + n^-q
  double C = 0.0;             // fitted on the first half of the range
  bool below = false;         // |rho(n)| <= C value(n) + noise floor on the whole range
};

Envelope theorem_envelope(const std::vector<double>& tau_tail, const std::vector<double>& rho,
                          double noise_floor, double q = 2.0, double delta = 0.5);

struct LDReport {
  double epsilon = 0.0;
  std::vector<std::size_t> n;
  std::vector<double> prob;
  std::vector<std::size_t> count;
  std::vector<double> upper;       // 95% upper bound (3/N when the count is zero)
  double exp_slope = 0.0;          // slope of log prob vs n over nonzero counts
  double loglog_slope = 0.0;       // slope of log prob vs log n
  bool at_least_linear = false;    // log tail decreasing at least linearly in n
  std::size_t samples = 0;
};

LDReport large_deviation(const Ensemble& e, const ScalarFn& v, double epsilon,
                         const std::vector<std::size_t>& n_grid);

struct CovarianceReport {
  Eigen::MatrixXd cov;
  double asymmetry = 0.0;
  double min_eigenvalue = 0.0;
  bool psd = false;
};

/// Covariance of n^-1/2 phi_n for vector observables, components centred
/// by their ensemble means.
CovarianceReport vector_covariance(const Ensemble& e, const Observable& phi);

}  // namespace ergolab
