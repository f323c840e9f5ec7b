#include "ipula/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "ipula/rng.hpp"

namespace ipula {

Image::Image(std::size_t w, std::size_t h, Vector p, int depth)
    : width(w), height(h), pixels(std::move(p)), bit_depth(depth) {
  validate();
}

void Image::validate() const {
  if (width == 0 || height == 0) {
    throw Error(ErrorCode::InvalidArgument, "image dimensions must be > 0");
  }
  require_dimension(pixels, width * height, "image pixels");
  if (!pixels.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "image has non-finite pixels");
  }
}

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext;
}

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// --- PGM -------------------------------------------------------------------

class PgmCursor {
 public:
  PgmCursor(const std::vector<unsigned char>& bytes, std::string name)
      : bytes_(bytes), name_(std::move(name)) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  unsigned long read_uint() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) corrupt();
    unsigned long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + static_cast<unsigned long>(bytes_[pos_] - '0');
      if (v > 0xFFFFFFFFUL) corrupt();
      ++pos_;
    }
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

  [[noreturn]] void corrupt() const {
    throw Error(ErrorCode::CorruptFile, "malformed PGM data in " + name_);
  }

 private:
  const std::vector<unsigned char>& bytes_;
  std::string name_;
  std::size_t pos_ = 2;
};

Image load_pgm(const std::vector<unsigned char>& bytes,
               const std::string& name) {
  const bool ascii = bytes[1] == '2';
  PgmCursor cur(bytes, name);
  const auto width = cur.read_uint();
  const auto height = cur.read_uint();
  const auto maxval = cur.read_uint();
  if (width == 0 || height == 0 || maxval == 0 || maxval > 65535) cur.corrupt();
  const std::size_t n = width * height;
  Vector pixels(static_cast<Eigen::Index>(n));
  const double scale = 1.0 / static_cast<double>(maxval);
  if (ascii) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = cur.read_uint();
      if (v > maxval) cur.corrupt();
      pixels[static_cast<Eigen::Index>(i)] = static_cast<double>(v) * scale;
    }
  } else {
    // Exactly one whitespace byte separates the header from raster data.
    if (cur.pos() >= bytes.size() || !std::isspace(bytes[cur.pos()])) {
      cur.corrupt();
    }
    cur.advance(1);
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    if (bytes.size() - cur.pos() < n * bpp) cur.corrupt();
    const unsigned char* p = bytes.data() + cur.pos();
    for (std::size_t i = 0; i < n; ++i) {
      unsigned long v = bpp == 2 ? (static_cast<unsigned long>(p[2 * i]) << 8) |
                                       p[2 * i + 1]
                                 : p[i];
      if (v > maxval) cur.corrupt();
      pixels[static_cast<Eigen::Index>(i)] = static_cast<double>(v) * scale;
    }
  }
  return Image(width, height, std::move(pixels), maxval > 255 ? 16 : 8);
}

std::vector<unsigned> quantize(const Image& image, int bit_depth) {
  const double maxval = bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<unsigned> out(image.width * image.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v =
        std::clamp(image.pixels[static_cast<Eigen::Index>(i)], 0.0, 1.0);
    out[i] = static_cast<unsigned>(std::lround(v * maxval));
  }
  return out;
}

void save_pgm(const Image& image, const std::filesystem::path& path,
              int bit_depth) {
  const auto q = quantize(image, bit_depth);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "P5\n"
      << image.width << ' ' << image.height << '\n'
      << (bit_depth == 16 ? 65535 : 255) << '\n';
  for (unsigned v : q) {
    if (bit_depth == 16) {
      out.put(static_cast<char>((v >> 8) & 0xFF));
    }
    out.put(static_cast<char>(v & 0xFF));
  }
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

// --- PNG -------------------------------------------------------------------

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Image load_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error(ErrorCode::IoError, "cannot open " + path.string());

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::IoError, "libpng initialisation failed");
  }
  std::vector<png_byte> data;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  int depth = 0, color = 0;
  volatile bool unsupported = false;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::CorruptFile, "corrupt PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  depth = png_get_bit_depth(png, info);
  color = png_get_color_type(png, info);
  if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_GRAY_ALPHA) {
    unsupported = true;
  } else {
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    data.resize(stride * height);
    rows.resize(height);
    for (png_uint_32 r = 0; r < height; ++r) rows[r] = data.data() + r * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (unsupported) {
    throw Error(ErrorCode::UnsupportedFormat,
                "only grayscale PNG is supported: " + path.string());
  }

  const std::size_t n = static_cast<std::size_t>(width) * height;
  Vector pixels(static_cast<Eigen::Index>(n));
  if (depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned v = (static_cast<unsigned>(data[2 * i]) << 8) | data[2 * i + 1];
      pixels[static_cast<Eigen::Index>(i)] = static_cast<double>(v) / 65535.0;
    }
  } else {
    // Sub-byte depths were expanded to 8 bits by libpng (scaled to 0..255).
    for (std::size_t i = 0; i < n; ++i) {
      pixels[static_cast<Eigen::Index>(i)] = static_cast<double>(data[i]) / 255.0;
    }
  }
  return Image(width, height, std::move(pixels), depth == 16 ? 16 : 8);
}

void save_png(const Image& image, const std::filesystem::path& path,
              int bit_depth) {
  const auto q = quantize(image, bit_depth);
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "libpng initialisation failed");
  }
  const std::size_t bpp = bit_depth == 16 ? 2 : 1;
  std::vector<png_byte> data(q.size() * bpp);
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (bpp == 2) {
      data[2 * i] = static_cast<png_byte>((q[i] >> 8) & 0xFF);
      data[2 * i + 1] = static_cast<png_byte>(q[i] & 0xFF);
    } else {
      data[i] = static_cast<png_byte>(q[i]);
    }
  }
  std::vector<png_bytep> rows(image.height);
  for (std::size_t r = 0; r < image.height; ++r) {
    rows[r] = data.data() + r * image.width * bpp;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "PNG encoding failed for " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), bit_depth,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  static constexpr std::array<unsigned char, 8> kPngMagic = {
      0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (bytes.size() >= 8 &&
      std::equal(kPngMagic.begin(), kPngMagic.end(), bytes.begin())) {
    return load_png(path);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P') {
    if (bytes[1] == '2' || bytes[1] == '5') return load_pgm(bytes, path.string());
    if (bytes[1] >= '1' && bytes[1] <= '7') {
      throw Error(ErrorCode::UnsupportedFormat,
                  "only grayscale PGM (P2/P5) is supported: " + path.string());
    }
  }
  throw Error(ErrorCode::CorruptFile,
              "not a PGM or PNG image: " + path.string());
}

void save_image(const Image& image, const std::filesystem::path& path,
                std::optional<int> bit_depth) {
  image.validate();
  const int depth = bit_depth.value_or(image.bit_depth);
  if (depth != 8 && depth != 16) {
    throw Error(ErrorCode::UnsupportedFormat, "bit depth must be 8 or 16");
  }
  const std::string ext = lower_extension(path);
  if (ext == ".pgm") {
    save_pgm(image, path, depth);
  } else if (ext == ".png") {
    save_png(image, path, depth);
  } else {
    throw Error(ErrorCode::UnsupportedFormat,
                "unknown image extension '" + ext + "' (use .pgm or .png)");
  }
}

// --- phantom ---------------------------------------------------------------

Image phantom(std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) {
    throw Error(ErrorCode::InvalidArgument, "phantom dimensions must be > 0");
  }
  struct Ellipse {
    double intensity, a, b, x0, y0, cos_t, sin_t;
  };
  // cos/sin of +-18 degrees written out so the phantom does not depend on
  // the platform's libm.
  constexpr double c18 = 0.95105651629515357;
  constexpr double s18 = 0.30901699437494742;
  static constexpr std::array<Ellipse, 10> kEllipses = {{
      {1.0, 0.69, 0.92, 0.0, 0.0, 1.0, 0.0},
      {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 1.0, 0.0},
      {-0.2, 0.1100, 0.3100, 0.22, 0.0, c18, -s18},
      {-0.2, 0.1600, 0.4100, -0.22, 0.0, c18, s18},
      {0.1, 0.2100, 0.2500, 0.0, 0.35, 1.0, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, 0.1, 1.0, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, -0.1, 1.0, 0.0},
      {0.1, 0.0460, 0.0230, -0.08, -0.605, 1.0, 0.0},
      {0.1, 0.0230, 0.0230, 0.0, -0.606, 1.0, 0.0},
      {0.1, 0.0230, 0.0460, 0.06, -0.605, 1.0, 0.0},
  }};
  auto inside = [](const Ellipse& e, double x, double y) {
    const double dx = x - e.x0;
    const double dy = y - e.y0;
    const double u = dx * e.cos_t + dy * e.sin_t;
    const double v = -dx * e.sin_t + dy * e.cos_t;
    return (u * u) / (e.a * e.a) + (v * v) / (e.b * e.b) <= 1.0;
  };

  Vector pixels = Vector::Zero(static_cast<Eigen::Index>(width * height));
  for (std::size_t r = 0; r < height; ++r) {
    const double y =
        1.0 - (2.0 * static_cast<double>(r) + 1.0) / static_cast<double>(height);
    for (std::size_t c = 0; c < width; ++c) {
      const double x =
          (2.0 * static_cast<double>(c) + 1.0) / static_cast<double>(width) - 1.0;
      double v = 0.0;
      for (const auto& e : kEllipses) {
        if (inside(e, x, y)) v += e.intensity;
      }
      // Smooth interior ramp inside the brain ellipse (second entry).
      if (inside(kEllipses[1], x, y)) v += 0.08 * (0.5 + 0.5 * y) + 0.04 * x * x;
      pixels[static_cast<Eigen::Index>(r * width + c)] = v;
    }
  }
  const double hi = pixels.maxCoeff();
  if (hi > 0.0) pixels /= hi;
  pixels = pixels.cwiseMax(0.0).cwiseMin(1.0);
  return Image(width, height, std::move(pixels), 8);
}

// --- degradation -------------------------------------------------------------

void DegradationConfig::validate() const {
  if (kernel_size == 0 || kernel_size % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument,
                "kernel_size must be odd so the box blur is centred");
  }
  if (std::isnan(bsnr_db)) {
    throw Error(ErrorCode::InvalidArgument, "bsnr_db must not be NaN");
  }
}

double pixel_variance(const Vector& v) {
  const double mean = v.mean();
  return (v.array() - mean).square().sum() / static_cast<double>(v.size());
}

Degradation degrade(const Image& image, const BlurOperator& blur,
                    const DegradationConfig& config) {
  config.validate();
  image.validate();
  if (image.width != blur.width() || image.height != blur.height()) {
    throw Error(ErrorCode::DimensionMismatch,
                "blur operator does not match image dimensions");
  }
  Degradation out;
  out.blurred = blur.apply(image.pixels);
  Vector y = out.blurred;
  if (std::isfinite(config.bsnr_db)) {
    const double var = pixel_variance(out.blurred);
    const double mean = out.blurred.mean();
    // FFT round-off leaves ~1e-32 variance on constant images.
    if (!(var > 1e-20 * (1.0 + mean * mean))) {
      throw Error(ErrorCode::DegenerateBSNR,
                  "blurred image has zero variance; BSNR noise level undefined");
    }
    const double noise_var = var / std::pow(10.0, config.bsnr_db / 10.0);
    out.noise_std = std::sqrt(noise_var);
    GaussianStream rng(derive_seed(config.noise_seed, Stream::Degradation));
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      y[i] += out.noise_std * rng.draw();
    }
  } else if (config.bsnr_db < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "bsnr_db must not be -infinity");
  }
  out.observation = Image(image.width, image.height, std::move(y), image.bit_depth);
  return out;
}

double realized_bsnr(const Vector& blurred, const Vector& observation) {
  require_dimension(observation, static_cast<std::size_t>(blurred.size()),
                    "realized_bsnr");
  return 10.0 * std::log10(pixel_variance(blurred) /
                           pixel_variance(observation - blurred));
}

Image wiener_init(const Image& observation, const BlurOperator& blur,
                  double noise_std, std::optional<double> regularization,
                  bool clamp) {
  observation.validate();
  if (observation.width != blur.width() || observation.height != blur.height()) {
    throw Error(ErrorCode::DimensionMismatch,
                "blur operator does not match observation dimensions");
  }
  double r = 0.0;
  if (regularization) {
    r = *regularization;
  } else {
    const double nv = noise_std * noise_std;
    const double sv = std::max(pixel_variance(observation.pixels) - nv, nv * 1e-12);
    r = sv > 0.0 ? nv / sv : 0.0;
  }
  if (!(r >= 0.0) || !std::isfinite(r)) {
    throw Error(ErrorCode::InvalidArgument,
                "Wiener regularization must be finite and non-negative");
  }
  const auto& fft = blur.fft();
  Spectrum y = fft.forward(observation.pixels);
  const Spectrum& k = blur.transfer();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double power = std::norm(k[i]);
    const double denom = power + r;
    y[i] = denom > 0.0 ? std::conj(k[i]) * y[i] / denom
                       : std::complex<double>(0.0, 0.0);
  }
  Vector x = fft.inverse(y);
  if (clamp) x = x.cwiseMax(0.0).cwiseMin(1.0);
  return Image(observation.width, observation.height, std::move(x),
               observation.bit_depth);
}

}  // namespace ipula
