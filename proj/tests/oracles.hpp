#pragma once

// Test-only reference computations. None of these call into the prox,
// envelope or bound code they are used to check.

#include <cmath>
#include <functional>
#include <random>

#include "ipula/common.hpp"

namespace oracle {

// Minimizer of a strictly convex 1-D function on [lo, hi] by golden-section
// search, iterated until the bracket is below `tol`.
inline double golden_min(const std::function<double(double)>& f, double lo,
                         double hi, double tol = 1e-13) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 400 && (b - a) > tol; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Coordinatewise prox of a separable potential sum_i phi(y_i):
// argmin_y phi(y) + (x - y)^2 / (2 gamma), searched on x +- width.
inline ipula::Vector separable_prox(const std::function<double(double)>& phi,
                                    const ipula::Vector& x, double gamma,
                                    double width = 50.0) {
  ipula::Vector y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    y[i] = golden_min(
        [&](double t) { return phi(t) + (xi - t) * (xi - t) / (2.0 * gamma); },
        xi - width, xi + width);
  }
  return y;
}

inline double separable_value(const std::function<double(double)>& phi,
                              const ipula::Vector& x) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += phi(x[i]);
  return s;
}

// Central finite-difference gradient.
inline ipula::Vector fd_gradient(
    const std::function<double(const ipula::Vector&)>& f,
    const ipula::Vector& x, double h = 1e-5) {
  ipula::Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    ipula::Vector a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

inline ipula::Vector random_vector(std::mt19937_64& rng, Eigen::Index n,
                                   double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  ipula::Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

// Direct (spatial) periodic convolution with a centred kernel.
inline ipula::Vector direct_circular_blur(const ipula::Vector& x,
                                          std::size_t width,
                                          std::size_t height,
                                          const Eigen::MatrixXd& kernel) {
  ipula::Vector out = ipula::Vector::Zero(x.size());
  const long kr = kernel.rows(), kc = kernel.cols();
  const long h = static_cast<long>(height), w = static_cast<long>(width);
  for (long r = 0; r < h; ++r) {
    for (long c = 0; c < w; ++c) {
      double s = 0.0;
      for (long i = 0; i < kr; ++i) {
        for (long j = 0; j < kc; ++j) {
          const long rr = ((r - (i - kr / 2)) % h + h) % h;
          const long cc = ((c - (j - kc / 2)) % w + w) % w;
          s += kernel(i, j) * x[rr * w + cc];
        }
      }
      out[r * w + c] = s;
    }
  }
  return out;
}

}  // namespace oracle
