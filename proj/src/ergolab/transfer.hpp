#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ergolab/inducing.hpp"
#include "ergolab/map_model.hpp"

namespace ergolab {

using SparseRM = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using CSparseRM = Eigen::SparseMatrix<std::complex<double>, Eigen::RowMajor>;

enum class OperatorKind { L_f, L_F, P_F };
const char* operator_kind_name(OperatorKind k);

/// Grid operator on k equal cells of [0,1], rows summing to 1.
///
/// L_f, L_F: entry(i,j) = m(B_i & T^-1 B_j) / m(B_i); densities evolve as
/// row vectors (v -> v M) and observables compose as column vectors
/// (w -> M w approximates w o T).
/// P_F: P = D_h^-1 M^T D_h acting on column vectors, so P 1 = 1.
struct UlamOperator {
  std::size_t k = 0;
  OperatorKind kind = OperatorKind::L_f;
  std::string source;
  SparseRM matrix;
  std::vector<char> empty_row;    // rows with no retained mass
  double max_correction = 0.0;    // largest row renormalisation |1 - mass|
  std::vector<std::string> log;

  // Scheme operators only.
  std::vector<int> taus;          // return times present, ascending
  std::vector<SparseRM> by_tau;   // parts with tau = taus[n], summing to matrix
  double truncation = 0.0;        // discarded Lebesgue mass of the scheme

  // P_F only.
  std::vector<double> density;    // h used in the conjugation
  SparseRM lebesgue;              // the L_F matrix it was built from

  double cell_width() const { return 1.0 / static_cast<double>(k); }
  double midpoint(std::size_t i) const { return (static_cast<double>(i) + 0.5) / static_cast<double>(k); }
};

UlamOperator ulam_matrix(const PiecewiseMap& map, std::size_t k);
UlamOperator ulam_matrix(const InducedScheme& scheme, std::size_t k);

/// P = h^-1 L (h .) for a scheme operator and its invariant density.
UlamOperator conjugate_operator(const UlamOperator& L, const std::vector<double>& h);

struct SpectralReport {
  double lambda1 = 0.0;
  double gamma_hat = 0.0;          // second largest modulus
  int multiplicity = 0;            // eigenvalues within 1e-8 of 1
  int peripheral = 0;              // eigenvalues of modulus within 1e-8 of 1
  bool non_mixing = false;
  std::vector<double> h;           // left fixed vector as a density (integral 1)
  std::size_t iterations = 0;
  double residual = 0.0;
  bool approximate = false;
  bool reducible = false;
  std::size_t retained = 0;        // size of the block used
  double h_bv = 0.0;               // grid BV norm of h
  double inv_h_bv = 0.0;           // grid BV norm of 1/h (inf if h vanishes)
  double inv_h_integral = 0.0;     // grid integral of 1/h
  std::vector<std::complex<double>> eigenvalues;  // leading, by modulus
  std::vector<std::string> log;
};

SpectralReport invariant_density(const UlamOperator& op, double tol = 1e-12,
                                 std::size_t max_iter = 200000);
/// Fills gamma_hat, multiplicity and the non-mixing flag.
SpectralReport spectral_gap(const UlamOperator& op, int n_eigs = 6);

double grid_bv_norm(const std::vector<double>& v);
/// L1 distance between a grid density and an exact density given with its
/// CDF; the exact density must be monotone on every grid cell.
double l1_to_exact(const std::vector<double>& h, const std::function<double(double)>& pdf,
                   const std::function<double(double)>& cdf);
double l1_distance(const std::vector<double>& a, const std::vector<double>& b);
/// Cell averages of a density on a coarser grid (k must divide size).
std::vector<double> coarsen(const std::vector<double>& h, std::size_t k);

struct TowerMeasure {
  std::vector<double> mu_Y;      // grid density on Y
  double mean_tau = 0.0;         // integral of tau d mu_Y
  std::vector<double> density;   // pushed density on I, k_out cells
  double dropped = 0.0;          // mu_Y mass skipped by the cutoff
};

TowerMeasure pushdown_measure(const InducedScheme& scheme, const std::vector<double>& h,
                              std::size_t k_out, double mass_cutoff = 1e-15);

struct RenewalFamily {
  std::size_t k = 0;
  std::vector<int> n;             // return times with nonzero P_n
  std::vector<SparseRM> P;        // P_n
  double truncation = 0.0;
  double completeness = 0.0;      // ||sum P_n - P||_inf
  std::vector<double> norms;      // ||P_n||_inf, aligned with n
  std::vector<std::size_t> active;  // cells carrying invariant mass

  Eigen::MatrixXcd evaluate(std::complex<double> z) const;
};

RenewalFamily renewal_operators(const UlamOperator& op_P, int tau_max);

struct RenewalPoint {
  std::complex<double> z;
  double sigma_min = 0.0;   // smallest singular value of Id - P(z)
  double sigma_next = 0.0;  // second smallest
  bool flagged = false;
};

struct RenewalCheck {
  std::vector<RenewalPoint> points;
  bool simple_at_one = false;
  double gamma_at_one = 0.0;
  bool mixing_failure = false;
  double decay_slope = 0.0;  // log-linear slope of ||P_n||
  std::vector<std::string> log;
};

RenewalCheck renewal_spectrum_check(const RenewalFamily& family,
                                    const std::vector<std::complex<double>>& z,
                                    double tol = 1e-6);

struct TailNormSums {
  double p = 0.0;
  double sup_sum = 0.0;
  double var_sum = 0.0;
  double tail_bound = 0.0;
};

TailNormSums tail_norm_sums(const InducedScheme& scheme, double p);
TailNormSums tail_norm_sums(const InducedScheme& scheme, double p, const CellStatistics& st);

struct TwistedOperator {
  double t = 0.0;
  CSparseRM matrix;
  double surrogate = 0.0;  // max row sum of |L_t - L_0| + grid variation of e^{itPhi} - 1
};

/// Phi on grid midpoints of the scheme operator's grid.
std::vector<double> grid_values(const UlamOperator& op, const InducedScheme& scheme,
                                const WeightedObservable& phi);
std::vector<TwistedOperator> twisted_operator(const UlamOperator& op_L, const std::vector<double>& phi,
                                              const std::vector<double>& t);

struct GordinResult {
  std::vector<double> chi;
  std::vector<double> phi_hat;
  double removed_mean = 0.0;   // h-weighted grid mean subtracted from Phi
  double residual = 0.0;       // ||P Phi_hat||_{L2(mu_Y)}, P(chi o F) = chi
  double phi_hat_norm = 0.0;
  double koopman_residual = 0.0;  // same with chi o F replaced by the grid Koopman operator
  std::size_t terms = 0;
  double truncation = 0.0;     // last increment, sup norm
  bool converged = false;
};

GordinResult gordin_solve(const UlamOperator& op_P, std::vector<double> phi, double tol = 1e-12,
                          std::size_t max_terms = 100000);

/// Exports (row, col, value) triplets.
std::vector<std::tuple<std::size_t, std::size_t, double>> triplets(const SparseRM& m);

}  // namespace ergolab
