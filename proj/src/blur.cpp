#include "ipula/blur.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>
#include <string>

namespace ipula {
namespace {

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct RealBuffer {
  explicit RealBuffer(std::size_t n) : data(fftw_alloc_real(n)) {}
  ~RealBuffer() { fftw_free(data); }
  RealBuffer(const RealBuffer&) = delete;
  RealBuffer& operator=(const RealBuffer&) = delete;
  double* data;
};

struct ComplexBuffer {
  explicit ComplexBuffer(std::size_t n) : data(fftw_alloc_complex(n)) {}
  ~ComplexBuffer() { fftw_free(data); }
  ComplexBuffer(const ComplexBuffer&) = delete;
  ComplexBuffer& operator=(const ComplexBuffer&) = delete;
  fftw_complex* data;
};

}  // namespace

PeriodicFft::PeriodicFft(std::size_t width, std::size_t height)
    : width_(width), height_(height) {
  if (width == 0 || height == 0) {
    throw Error(ErrorCode::InvalidArgument, "FFT grid must be non-empty");
  }
  RealBuffer real(pixels());
  ComplexBuffer spec(spectrum_size());
  std::lock_guard<std::mutex> lock(planner_mutex());
  const int n0 = static_cast<int>(height_);
  const int n1 = static_cast<int>(width_);
  forward_plan_ =
      fftw_plan_dft_r2c_2d(n0, n1, real.data, spec.data, FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_c2r_2d(n0, n1, spec.data, real.data,
                                       FFTW_ESTIMATE | FFTW_DESTROY_INPUT);
}

PeriodicFft::~PeriodicFft() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

Spectrum PeriodicFft::forward(const Vector& image) const {
  require_dimension(image, pixels(), "PeriodicFft::forward");
  RealBuffer real(pixels());
  ComplexBuffer spec(spectrum_size());
  std::memcpy(real.data, image.data(), pixels() * sizeof(double));
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), real.data,
                       spec.data);
  Spectrum out(spectrum_size());
  std::memcpy(static_cast<void*>(out.data()), spec.data,
              spectrum_size() * sizeof(fftw_complex));
  return out;
}

Vector PeriodicFft::inverse(const Spectrum& spectrum) const {
  if (spectrum.size() != spectrum_size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "PeriodicFft::inverse: spectrum size mismatch");
  }
  RealBuffer real(pixels());
  ComplexBuffer spec(spectrum_size());
  std::memcpy(spec.data, spectrum.data(),
              spectrum_size() * sizeof(fftw_complex));
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_), spec.data,
                       real.data);
  Vector out(static_cast<Eigen::Index>(pixels()));
  const double scale = 1.0 / static_cast<double>(pixels());
  for (std::size_t i = 0; i < pixels(); ++i) out[i] = real.data[i] * scale;
  return out;
}

BlurOperator::BlurOperator(std::size_t width, std::size_t height,
                           const Eigen::MatrixXd& kernel)
    : kernel_(kernel),
      fft_(std::make_shared<const PeriodicFft>(width, height)) {
  const auto kr = static_cast<std::size_t>(kernel.rows());
  const auto kc = static_cast<std::size_t>(kernel.cols());
  if (kr == 0 || kc == 0 || kr % 2 == 0 || kc % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument,
                "blur kernel must have odd, non-zero dimensions");
  }
  if (kr > height || kc > width) {
    throw Error(ErrorCode::InvalidArgument, "blur kernel larger than image");
  }
  // Place the kernel with its centre at pixel (0,0), wrapping negative
  // offsets to the far edge.
  Vector psf = Vector::Zero(static_cast<Eigen::Index>(width * height));
  const auto cr = static_cast<long>(kr / 2);
  const auto cc = static_cast<long>(kc / 2);
  const auto h = static_cast<long>(height);
  const auto w = static_cast<long>(width);
  for (long i = 0; i < static_cast<long>(kr); ++i) {
    for (long j = 0; j < static_cast<long>(kc); ++j) {
      const long r = ((i - cr) % h + h) % h;
      const long c = ((j - cc) % w + w) % w;
      psf[r * w + c] += kernel(i, j);
    }
  }
  transfer_ = fft_->forward(psf);
  transfer_conj_.resize(transfer_.size());
  transfer_power_.resize(transfer_.size());
  for (std::size_t i = 0; i < transfer_.size(); ++i) {
    transfer_conj_[i] = std::conj(transfer_[i]);
    transfer_power_[i] = std::norm(transfer_[i]);
  }
}

BlurOperator BlurOperator::box(std::size_t width, std::size_t height,
                               std::size_t kernel_size) {
  if (kernel_size == 0 || kernel_size % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument,
                "box kernel size must be odd, got " +
                    std::to_string(kernel_size));
  }
  const auto k = static_cast<Eigen::Index>(kernel_size);
  const double weight = 1.0 / static_cast<double>(kernel_size * kernel_size);
  return BlurOperator(width, height, Eigen::MatrixXd::Constant(k, k, weight));
}

Vector BlurOperator::filter(const Vector& x, const Spectrum& response) const {
  Spectrum spec = fft_->forward(x);
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= response[i];
  return fft_->inverse(spec);
}

Vector BlurOperator::apply(const Vector& x) const {
  require_dimension(x, pixels(), "BlurOperator::apply");
  return filter(x, transfer_);
}

Vector BlurOperator::adjoint(const Vector& z) const {
  require_dimension(z, pixels(), "BlurOperator::adjoint");
  return filter(z, transfer_conj_);
}

Vector BlurOperator::apply_normal(const Vector& x) const {
  require_dimension(x, pixels(), "BlurOperator::apply_normal");
  return filter(x, transfer_power_);
}

}  // namespace ipula
