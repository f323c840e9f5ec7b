#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>

#include "ipula/blur.hpp"
#include "ipula/common.hpp"

namespace ipula {

// Grayscale image, row-major, nominally in [0, 1].
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  Vector pixels;
  // Precision of the file the image came from (8 or 16); used by save_image.
  int bit_depth = 8;

  Image() = default;
  Image(std::size_t w, std::size_t h, Vector p, int depth = 8);

  double at(std::size_t row, std::size_t col) const {
    return pixels[static_cast<Eigen::Index>(row * width + col)];
  }
  void validate() const;
};

// PGM (P2/P5, 8 or 16 bit) and grayscale PNG (1-16 bit). Values are scaled
// by the file's maxval to [0, 1].
Image load_image(const std::filesystem::path& path);
// Format from the extension (.pgm or .png). Values are clamped to [0, 1]
// and quantized at `bit_depth` (default: image.bit_depth).
void save_image(const Image& image, const std::filesystem::path& path,
                std::optional<int> bit_depth = std::nullopt);

// Deterministic ellipse phantom (modified Shepp-Logan layout with a smooth
// ramp inside the brain region), normalized to [0, 1].
Image phantom(std::size_t width, std::size_t height);

struct DegradationConfig {
  std::size_t kernel_size = 5;
  // +infinity disables noise.
  double bsnr_db = 40.0;
  std::uint64_t noise_seed = 0;

  void validate() const;
};

struct Degradation {
  Image observation;
  // Standard deviation of the added noise; 0 when bsnr_db is infinite.
  double noise_std = 0.0;
  Vector blurred;
};

// Population variance (divide by N).
double pixel_variance(const Vector& v);

// y = Hx + e with e ~ N(0, s^2 I), s^2 = Var(Hx) / 10^(bsnr/10).
Degradation degrade(const Image& image, const BlurOperator& blur,
                    const DegradationConfig& config);

// Empirical BSNR 10 log10(Var(blurred) / Var(observation - blurred)).
double realized_bsnr(const Vector& blurred, const Vector& observation);

// Frequency-domain Wiener filter conj(K) Y / (|K|^2 + r). When
// `regularization` is absent, r = s^2 / max(Var(y) - s^2, s^2 * 1e-12).
Image wiener_init(const Image& observation, const BlurOperator& blur,
                  double noise_std,
                  std::optional<double> regularization = std::nullopt,
                  bool clamp = true);

}  // namespace ipula
