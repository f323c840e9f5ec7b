#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

#include "ipula/common.hpp"

namespace ipula {

using Spectrum = std::vector<std::complex<double>>;

// Real-to-complex 2-D FFT on a periodic height x width grid. Images are
// row-major vectors of length width*height. Plans are built once
// (FFTW_ESTIMATE, so results do not depend on timing) and executed through
// the new-array interface, which is safe from concurrent threads.
class PeriodicFft {
 public:
  PeriodicFft(std::size_t width, std::size_t height);
  ~PeriodicFft();
  PeriodicFft(const PeriodicFft&) = delete;
  PeriodicFft& operator=(const PeriodicFft&) = delete;

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t pixels() const noexcept { return width_ * height_; }
  // Number of stored complex coefficients: height * (width/2 + 1).
  std::size_t spectrum_size() const noexcept {
    return height_ * (width_ / 2 + 1);
  }

  Spectrum forward(const Vector& image) const;
  // Unnormalized inverse divided by the pixel count, so inverse(forward(x))
  // reproduces x.
  Vector inverse(const Spectrum& spectrum) const;

 private:
  std::size_t width_;
  std::size_t height_;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

// Spatially invariant blur H under periodic boundary conditions, applied in
// the frequency domain. The kernel is centred: entry (kr/2, kc/2) sits on
// the output pixel.
class BlurOperator {
 public:
  BlurOperator(std::size_t width, std::size_t height,
               const Eigen::MatrixXd& kernel);

  // kernel_size x kernel_size uniform box with entries 1/kernel_size^2.
  static BlurOperator box(std::size_t width, std::size_t height,
                          std::size_t kernel_size = 5);

  std::size_t width() const noexcept { return fft_->width(); }
  std::size_t height() const noexcept { return fft_->height(); }
  std::size_t pixels() const noexcept { return fft_->pixels(); }
  const Eigen::MatrixXd& kernel() const noexcept { return kernel_; }

  Vector apply(const Vector& x) const;
  Vector adjoint(const Vector& z) const;
  // H^T H x in a single transform round trip.
  Vector apply_normal(const Vector& x) const;

  const Spectrum& transfer() const noexcept { return transfer_; }
  const PeriodicFft& fft() const noexcept { return *fft_; }

 private:
  Vector filter(const Vector& x, const Spectrum& response) const;

  Eigen::MatrixXd kernel_;
  std::shared_ptr<const PeriodicFft> fft_;
  Spectrum transfer_;
  Spectrum transfer_conj_;
  Spectrum transfer_power_;
};

}  // namespace ipula
