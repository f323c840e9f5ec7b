#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ipula/common.hpp"

namespace ipula {

// Constants feeding the convergence bounds. m_gamma = sigma/(1+gamma sigma)
// and l_gamma = 1/gamma are derived once in make().
struct BoundParams {
  double sigma = 1.0;
  double gamma = 1.0;
  double m_gamma = 0.5;
  double l_gamma = 1.0;
  double eta = 0.1;
  double delta = 0.0;
  std::size_t dimension = 1;
  double b_disc = 0.0;

  static BoundParams make(double sigma, double gamma, double eta,
                          double delta, std::size_t dimension,
                          double b_disc = 0.0);
};

// rho = 1 - m eta (1 - 2 L eta); requires eta in (0, 1/(2L)).
double contraction_rho(const BoundParams& p);
// q = sqrt(1 - 2 m eta + L^2 eta^2); requires eta in (0, 2m/L^2) and
// eta in (0, 2/L).
double coupling_q(const BoundParams& p);

// rho^k gap0 + (eta(1/2 + L eta) delta^2 + eta L n) / (1 - rho)
double fixed_gap_bound(const BoundParams& p, std::size_t k, double gap0);

// rho^k gap0 + eta(1/2 + L eta) sum_{j<k} rho^{k-1-j} tau_j^2
//   + eta L n (1 - rho^k)/(1 - rho). taus must hold at least k entries.
double adaptive_gap_bound(const BoundParams& p, std::size_t k, double gap0,
                          std::span<const double> taus);

// eta delta (1 - q^k)/(1 - q)
double transfer_bound(const BoundParams& p, std::size_t k);
// eta sum_{j<k} q^{k-1-j} tau_j
double adaptive_transfer_bound(const BoundParams& p, std::size_t k,
                               std::span<const double> taus);
// b_disc + eta delta / (1 - q)
double stationary_floor(const BoundParams& p);

struct StepMatchedTerms {
  double noise_floor;   // L n / (m (1 - 2 L eta))
  double oracle_floor;  // c^2 eta (1/2 + L eta) / (m (1 - 2 L eta))
};
StepMatchedTerms step_matched_terms(const BoundParams& p, double c);
double step_matched_gap_bound(const BoundParams& p, double c, std::size_t k,
                              double gap0);

// All bound curves for k = 0..k_max, evaluated by running the recursions
// forward (O(k_max)) rather than re-summing.
std::vector<double> adaptive_gap_curve(const BoundParams& p,
                                       std::size_t k_max, double gap0,
                                       std::span<const double> taus);
std::vector<double> adaptive_transfer_curve(const BoundParams& p,
                                            std::size_t k_max,
                                            std::span<const double> taus);

// adaptive_transfer_curve evaluated with outward rounding: each entry is
// an upper bound on the exact real-valued bound for (sigma, gamma, eta) and
// the given taus. Used for zero-tolerance pathwise checks, where k = 1 is an
// equality case in exact arithmetic.
std::vector<double> certified_transfer_curve(const BoundParams& p,
                                             std::size_t k_max,
                                             std::span<const double> taus);

// Maximum over k of distances[k] / bound(k) for a coupled trace, with the
// convention 0/0 = 0 and x/0 = +inf for x > 0.
struct TransferVerdict {
  double max_ratio = 0.0;
  std::size_t worst_k = 0;
  double worst_distance = 0.0;
  double worst_bound = 0.0;
  bool pass = true;  // max_ratio <= 1
};
TransferVerdict check_transfer(std::span<const double> distances,
                               std::span<const double> bounds);

// --- image and trace metrics ----------------------------------------------

// 10 log10(peak^2 / MSE); +infinity when the images agree exactly.
double psnr(const Vector& reference, const Vector& candidate, double peak);
// max - min of the reference.
double dynamic_range(const Vector& image);

struct SsimOptions {
  std::size_t window = 7;
  double k1 = 0.01;
  double k2 = 0.03;
  double peak = 1.0;
};
// Mean single-scale SSIM over all valid uniform windows.
double ssim(const Vector& reference, const Vector& candidate,
            std::size_t width, std::size_t height, const SsimOptions& options);

// Biased sample autocorrelation, lags 0..max_lag. Throws ConstantSeries if
// the series has zero variance.
std::vector<double> acf(std::span<const double> series, std::size_t max_lag);

// W2 between the empirical law of `samples` and N(mean, sd^2), through
// sorted samples against Gaussian quantiles at (i + 1/2)/N.
double w2_to_gaussian_1d(std::vector<double> samples, double mean, double sd);

// Order-independent accumulation: pairwise sum of a fixed-order array.
double pairwise_sum(std::span<const double> values);

}  // namespace ipula
