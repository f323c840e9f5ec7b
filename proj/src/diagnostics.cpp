#include "ipula/diagnostics.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace ipula {
namespace {

[[noreturn]] void step_error(const std::string& what, const BoundParams& p) {
  std::ostringstream os;
  os << what << " (eta=" << p.eta << ", m_gamma=" << p.m_gamma
     << ", L_gamma=" << p.l_gamma << ")";
  throw Error(ErrorCode::StepSizeOutOfRange, os.str());
}

void require_taus(std::span<const double> taus, std::size_t k) {
  if (taus.size() < k) {
    throw Error(ErrorCode::InvalidArgument,
                "tolerance sequence shorter than k=" + std::to_string(k));
  }
}

}  // namespace

BoundParams BoundParams::make(double sigma, double gamma, double eta,
                              double delta, std::size_t dimension,
                              double b_disc) {
  if (!(sigma > 0.0) || !(gamma > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "sigma and gamma must be positive");
  }
  if (!(delta >= 0.0) || !(b_disc >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "delta and b_disc must be non-negative");
  }
  BoundParams p;
  p.sigma = sigma;
  p.gamma = gamma;
  p.m_gamma = sigma / (1.0 + gamma * sigma);
  p.l_gamma = 1.0 / gamma;
  p.eta = eta;
  p.delta = delta;
  p.dimension = dimension;
  p.b_disc = b_disc;
  return p;
}

double contraction_rho(const BoundParams& p) {
  if (!(p.eta > 0.0) || !(p.eta < 1.0 / (2.0 * p.l_gamma))) {
    step_error("rho needs eta in (0, 1/(2 L_gamma))", p);
  }
  return 1.0 - p.m_gamma * p.eta * (1.0 - 2.0 * p.l_gamma * p.eta);
}

double coupling_q(const BoundParams& p) {
  const double upper =
      std::min(2.0 * p.m_gamma / (p.l_gamma * p.l_gamma), 2.0 / p.l_gamma);
  if (!(p.eta > 0.0) || !(p.eta < upper)) {
    step_error("q needs eta in (0, 2 m_gamma/L_gamma^2) and (0, 2/L_gamma)", p);
  }
  const double inside = 1.0 - 2.0 * p.m_gamma * p.eta +
                        p.l_gamma * p.l_gamma * p.eta * p.eta;
  // m <= L makes `inside` a non-negative square in exact arithmetic.
  return std::sqrt(std::max(inside, 0.0));
}

double fixed_gap_bound(const BoundParams& p, std::size_t k, double gap0) {
  const double rho = contraction_rho(p);
  const double floor_num =
      p.eta * (0.5 + p.l_gamma * p.eta) * p.delta * p.delta +
      p.eta * p.l_gamma * static_cast<double>(p.dimension);
  return std::pow(rho, static_cast<double>(k)) * gap0 + floor_num / (1.0 - rho);
}

double adaptive_gap_bound(const BoundParams& p, std::size_t k, double gap0,
                          std::span<const double> taus) {
  require_taus(taus, k);
  const double rho = contraction_rho(p);
  double conv = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    conv += std::pow(rho, static_cast<double>(k - 1 - j)) * taus[j] * taus[j];
  }
  const double rk = std::pow(rho, static_cast<double>(k));
  return rk * gap0 + p.eta * (0.5 + p.l_gamma * p.eta) * conv +
         p.eta * p.l_gamma * static_cast<double>(p.dimension) * (1.0 - rk) /
             (1.0 - rho);
}

double transfer_bound(const BoundParams& p, std::size_t k) {
  const double q = coupling_q(p);
  return p.eta * p.delta * (1.0 - std::pow(q, static_cast<double>(k))) /
         (1.0 - q);
}

double adaptive_transfer_bound(const BoundParams& p, std::size_t k,
                               std::span<const double> taus) {
  require_taus(taus, k);
  const double q = coupling_q(p);
  double sum = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    sum += std::pow(q, static_cast<double>(k - 1 - j)) * taus[j];
  }
  return p.eta * sum;
}

double stationary_floor(const BoundParams& p) {
  const double q = coupling_q(p);
  return p.b_disc + p.eta * p.delta / (1.0 - q);
}

StepMatchedTerms step_matched_terms(const BoundParams& p, double c) {
  contraction_rho(p);  // range check
  const double denom = p.m_gamma * (1.0 - 2.0 * p.l_gamma * p.eta);
  return {p.l_gamma * static_cast<double>(p.dimension) / denom,
          c * c * p.eta * (0.5 + p.l_gamma * p.eta) / denom};
}

double step_matched_gap_bound(const BoundParams& p, double c, std::size_t k,
                              double gap0) {
  const double rho = contraction_rho(p);
  const StepMatchedTerms t = step_matched_terms(p, c);
  return std::pow(rho, static_cast<double>(k)) * gap0 + t.noise_floor +
         t.oracle_floor;
}

std::vector<double> adaptive_gap_curve(const BoundParams& p,
                                       std::size_t k_max, double gap0,
                                       std::span<const double> taus) {
  require_taus(taus, k_max);
  const double rho = contraction_rho(p);
  const double a = p.eta * (0.5 + p.l_gamma * p.eta);
  const double noise = p.eta * p.l_gamma * static_cast<double>(p.dimension);
  std::vector<double> out(k_max + 1);
  // b_{k+1} = rho b_k + a tau_k^2 + noise, b_0 = gap0
  double b = gap0;
  out[0] = b;
  for (std::size_t k = 0; k < k_max; ++k) {
    b = rho * b + a * taus[k] * taus[k] + noise;
    out[k + 1] = b;
  }
  return out;
}

std::vector<double> adaptive_transfer_curve(const BoundParams& p,
                                            std::size_t k_max,
                                            std::span<const double> taus) {
  require_taus(taus, k_max);
  const double q = coupling_q(p);
  std::vector<double> out(k_max + 1);
  double d = 0.0;
  out[0] = 0.0;
  for (std::size_t k = 0; k < k_max; ++k) {
    d = q * d + p.eta * taus[k];
    out[k + 1] = d;
  }
  return out;
}

namespace {

double up(double x) { return std::nextafter(x, std::numeric_limits<double>::infinity()); }
double down(double x) { return std::nextafter(x, -std::numeric_limits<double>::infinity()); }

}  // namespace

std::vector<double> certified_transfer_curve(const BoundParams& p,
                                             std::size_t k_max,
                                             std::span<const double> taus) {
  require_taus(taus, k_max);
  coupling_q(p);  // range check
  // Every operation is rounded outward, one ulp past round-to-nearest.
  const double m_lo = down(p.sigma / up(1.0 + up(p.gamma * p.sigma)));
  const double l_hi = up(1.0 / p.gamma);
  const double two_m_eta_lo = down(down(2.0 * m_lo) * p.eta);
  const double l2_eta2_hi = up(up(l_hi * l_hi) * up(p.eta * p.eta));
  const double inside_hi = up(up(1.0 - two_m_eta_lo) + l2_eta2_hi);
  const double q_hi = up(std::sqrt(inside_hi));
  std::vector<double> out(k_max + 1);
  double d = 0.0;
  out[0] = 0.0;
  for (std::size_t k = 0; k < k_max; ++k) {
    d = up(up(q_hi * d) + up(p.eta * taus[k]));
    out[k + 1] = d;
  }
  return out;
}

TransferVerdict check_transfer(std::span<const double> distances,
                               std::span<const double> bounds) {
  if (distances.size() != bounds.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "check_transfer: distance and bound curves differ in length");
  }
  TransferVerdict v;
  for (std::size_t k = 0; k < distances.size(); ++k) {
    double ratio = 0.0;
    if (bounds[k] > 0.0) {
      ratio = distances[k] / bounds[k];
    } else if (distances[k] > 0.0) {
      ratio = std::numeric_limits<double>::infinity();
    }
    if (k == 0 || ratio > v.max_ratio) {
      v.max_ratio = ratio;
      v.worst_k = k;
      v.worst_distance = distances[k];
      v.worst_bound = bounds[k];
    }
  }
  v.pass = v.max_ratio <= 1.0;
  return v;
}

// --- metrics ---------------------------------------------------------------

double dynamic_range(const Vector& image) {
  if (image.size() == 0) return 0.0;
  return image.maxCoeff() - image.minCoeff();
}

double psnr(const Vector& reference, const Vector& candidate, double peak) {
  require_dimension(candidate, static_cast<std::size_t>(reference.size()),
                    "psnr");
  if (!(peak > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "psnr peak must be positive");
  }
  const double mse =
      (reference - candidate).squaredNorm() / static_cast<double>(reference.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Vector& reference, const Vector& candidate,
            std::size_t width, std::size_t height, const SsimOptions& o) {
  require_dimension(reference, width * height, "ssim reference");
  require_dimension(candidate, width * height, "ssim candidate");
  if (o.window == 0 || o.window > width || o.window > height) {
    throw Error(ErrorCode::InvalidArgument, "ssim window does not fit image");
  }
  const double c1 = (o.k1 * o.peak) * (o.k1 * o.peak);
  const double c2 = (o.k2 * o.peak) * (o.k2 * o.peak);
  const std::size_t w = o.window;
  const double np = static_cast<double>(w * w);
  const double cov_norm = np / (np - 1.0);

  // Summed-area tables of a, b, a^2, b^2, ab with one row/column of padding.
  const std::size_t sw = width + 1;
  std::vector<double> sa((height + 1) * sw, 0.0), sb(sa.size(), 0.0),
      saa(sa.size(), 0.0), sbb(sa.size(), 0.0), sab(sa.size(), 0.0);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const double a = reference[r * width + c];
      const double b = candidate[r * width + c];
      const std::size_t i = (r + 1) * sw + (c + 1);
      const std::size_t up = r * sw + (c + 1);
      const std::size_t left = (r + 1) * sw + c;
      const std::size_t diag = r * sw + c;
      sa[i] = a + sa[up] + sa[left] - sa[diag];
      sb[i] = b + sb[up] + sb[left] - sb[diag];
      saa[i] = a * a + saa[up] + saa[left] - saa[diag];
      sbb[i] = b * b + sbb[up] + sbb[left] - sbb[diag];
      sab[i] = a * b + sab[up] + sab[left] - sab[diag];
    }
  }
  auto box = [&](const std::vector<double>& s, std::size_t r, std::size_t c) {
    return s[(r + w) * sw + (c + w)] - s[r * sw + (c + w)] -
           s[(r + w) * sw + c] + s[r * sw + c];
  };

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r + w <= height; ++r) {
    for (std::size_t c = 0; c + w <= width; ++c) {
      const double ma = box(sa, r, c) / np;
      const double mb = box(sb, r, c) / np;
      const double va = cov_norm * (box(saa, r, c) / np - ma * ma);
      const double vb = cov_norm * (box(sbb, r, c) / np - mb * mb);
      const double cab = cov_norm * (box(sab, r, c) / np - ma * mb);
      total += ((2.0 * ma * mb + c1) * (2.0 * cab + c2)) /
               ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

std::vector<double> acf(std::span<const double> series, std::size_t max_lag) {
  const std::size_t n = series.size();
  if (n < 2) {
    throw Error(ErrorCode::InvalidArgument, "acf needs at least two samples");
  }
  if (max_lag >= n) max_lag = n - 1;
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> centred(n);
  for (std::size_t i = 0; i < n; ++i) centred[i] = series[i] - mean;
  double c0 = 0.0;
  for (double v : centred) c0 += v * v;
  if (!(c0 > 0.0)) {
    throw Error(ErrorCode::ConstantSeries, "acf of a constant series");
  }
  std::vector<double> out(max_lag + 1);
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += centred[i] * centred[i + lag];
    out[lag] = s / c0;
  }
  out[0] = 1.0;
  return out;
}

double w2_to_gaussian_1d(std::vector<double> samples, double mean, double sd) {
  if (samples.empty()) {
    throw Error(ErrorCode::InvalidArgument, "w2 needs samples");
  }
  if (!(sd > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "w2 reference sd must be positive");
  }
  std::sort(samples.begin(), samples.end());
  const boost::math::normal_distribution<double> normal(mean, sd);
  const double n = static_cast<double>(samples.size());
  std::vector<double> sq(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double qi =
        boost::math::quantile(normal, (static_cast<double>(i) + 0.5) / n);
    const double d = samples[i] - qi;
    sq[i] = d * d;
  }
  return std::sqrt(pairwise_sum(sq) / n);
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.subspan(0, half)) +
         pairwise_sum(values.subspan(half));
}

}  // namespace ipula
