#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>

#include "ipula/diagnostics.hpp"
#include "ipula/imaging.hpp"
#include "ipula/potentials.hpp"
#include "oracles.hpp"

using namespace ipula;
namespace fs = std::filesystem;

// Regression value for TV(phantom(128, 128)).
constexpr double PHANTOM_TV_128 = 787.4559570313445;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ipula_imaging_tests";
  fs::create_directories(dir);
  return dir / name;
}

Image random_image(std::size_t w, std::size_t h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector p(static_cast<Eigen::Index>(w * h));
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = u(rng);
  return Image(w, h, p);
}

ErrorCode code_of(const fs::path& path) {
  try {
    load_image(path);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("round trips stay within half a quantization level") {
  const Image img = random_image(17, 9, 1);
  for (const char* name : {"rt8.pgm", "rt8.png"}) {
    save_image(img, scratch(name), 8);
    const Image back = load_image(scratch(name));
    CHECK(back.width == 17);
    CHECK(back.height == 9);
    CHECK(back.bit_depth == 8);
    CHECK((back.pixels - img.pixels).cwiseAbs().maxCoeff() <= 0.5 / 255.0 + 1e-15);
  }
  for (const char* name : {"rt16.pgm", "rt16.png"}) {
    save_image(img, scratch(name), 16);
    const Image back = load_image(scratch(name));
    CHECK(back.bit_depth == 16);
    CHECK((back.pixels - img.pixels).cwiseAbs().maxCoeff() <= 0.5 / 65535.0 + 1e-15);
    // Second round trip is lossless at 16 bit.
    save_image(back, scratch(name));
    CHECK((load_image(scratch(name)).pixels - back.pixels).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("ascii graymap is read") {
  const auto path = scratch("ascii.pgm");
  {
    std::ofstream f(path);
    f << "P2\n# comment\n3 2\n10\n0 5 10\n10 5 0\n";
  }
  const Image img = load_image(path);
  CHECK(img.width == 3);
  CHECK(img.height == 2);
  CHECK(img.at(0, 1) == doctest::Approx(0.5));
  CHECK(img.at(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("bad files are rejected with the right code") {
  const auto junk = scratch("junk.pgm");
  {
    std::ofstream f(junk);
    f << "this is not an image";
  }
  CHECK(code_of(junk) == ErrorCode::CorruptFile);

  const auto ppm = scratch("color.ppm");
  {
    std::ofstream f(ppm, std::ios::binary);
    f << "P6\n1 1\n255\n" << '\x01' << '\x02' << '\x03';
  }
  CHECK(code_of(ppm) == ErrorCode::UnsupportedFormat);

  const auto truncated = scratch("trunc.pgm");
  {
    std::ofstream f(truncated, std::ios::binary);
    f << "P5\n4 4\n255\n" << "abc";
  }
  CHECK(code_of(truncated) == ErrorCode::CorruptFile);

  CHECK_THROWS_AS(load_image(scratch("does_not_exist.png")), Error);
  CHECK_THROWS_AS(save_image(random_image(2, 2, 3), scratch("x.bmp")), Error);
}

TEST_CASE("phantom") {
  const Image a = phantom(128, 128);
  const Image b = phantom(128, 128);
  CHECK((a.pixels - b.pixels).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.pixels.minCoeff() >= 0.0);
  CHECK(a.pixels.maxCoeff() == doctest::Approx(1.0));
  CHECK(a.at(0, 0) == 0.0);
  CHECK(a.at(0, 127) == 0.0);
  CHECK(a.at(127, 0) == 0.0);
  CHECK(a.at(127, 127) == 0.0);
  const double tv = total_variation(a.pixels, 128, 128);
  CHECK(tv > 0.0);
  CHECK(tv == doctest::Approx(PHANTOM_TV_128).epsilon(1e-12));
  CHECK(phantom(64, 48).pixels.size() == 64 * 48);
}

TEST_CASE("degrade") {
  const Image x = phantom(128, 128);
  const auto blur = BlurOperator::box(128, 128, 5);

  DegradationConfig clean;
  clean.bsnr_db = std::numeric_limits<double>::infinity();
  const auto d0 = degrade(x, blur, clean);
  CHECK(d0.noise_std == 0.0);
  CHECK((d0.observation.pixels - blur.apply(x.pixels)).cwiseAbs().maxCoeff() == 0.0);

  DegradationConfig cfg;
  cfg.noise_seed = 42;
  const auto d = degrade(x, blur, cfg);
  CHECK(d.noise_std * d.noise_std ==
        doctest::Approx(pixel_variance(d.blurred) * 1e-4).epsilon(1e-12));
  CHECK(std::abs(realized_bsnr(d.blurred, d.observation.pixels) - 40.0) <= 0.2);
  const auto again = degrade(x, blur, cfg);
  CHECK((again.observation.pixels - d.observation.pixels).cwiseAbs().maxCoeff() == 0.0);

  // Realized BSNR across many seeds.
  for (std::uint64_t s = 0; s < 20; ++s) {
    cfg.noise_seed = s;
    const auto ds = degrade(x, blur, cfg);
    CHECK(std::abs(realized_bsnr(ds.blurred, ds.observation.pixels) - 40.0) <= 0.2);
  }

  const Image flat(128, 128, Vector::Constant(128 * 128, 0.3));
  try {
    degrade(flat, blur, DegradationConfig{});
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateBSNR);
  }
  CHECK_THROWS_AS(degrade(phantom(64, 64), blur, cfg), Error);
}

TEST_CASE("wiener examples") {
  // Identity kernel: output = y / (1 + r).
  Eigen::MatrixXd one(1, 1);
  one << 1.0;
  const BlurOperator id(16, 12, one);
  const Image y = random_image(16, 12, 5);
  const Image w = wiener_init(y, id, 0.1, 0.25, false);
  CHECK((w.pixels - y.pixels / 1.25).cwiseAbs().maxCoeff() < 1e-14);

  // Noise-free, tiny r, invertible spectrum: recovers the preimage.
  Eigen::MatrixXd k(3, 3);
  k << 0.0, 0.1, 0.0, 0.1, 0.6, 0.1, 0.0, 0.1, 0.0;  // spectrum >= 0.2
  const BlurOperator h(16, 12, k);
  const Image x = random_image(16, 12, 6);
  const Image hx(16, 12, h.apply(x.pixels));
  const Image rec = wiener_init(hx, h, 0.0, 1e-14, false);
  CHECK((rec.pixels - x.pixels).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("wiener commutes with intensity shifts before degradation") {
  const Image x = phantom(64, 64);
  const auto blur = BlurOperator::box(64, 64, 5);
  DegradationConfig cfg;
  cfg.noise_seed = 3;
  const auto d = degrade(x, blur, cfg);
  const Image shifted(64, 64, x.pixels.array() + 0.2);
  const auto ds = degrade(shifted, blur, cfg);
  // Same noise draws, same variance (shift-invariant), so same sigma.
  CHECK(ds.noise_std == doctest::Approx(d.noise_std).epsilon(1e-9));
  const double r = 1e-3;
  const Image w = wiener_init(d.observation, blur, d.noise_std, r, false);
  const Image ws = wiener_init(ds.observation, blur, ds.noise_std, r, false);
  // The box blur passes DC with gain 1, so a shift c maps to c / (1 + r).
  CHECK(((ws.pixels - w.pixels).array() - 0.2 / (1.0 + r)).abs().maxCoeff() < 1e-9);
}

TEST_CASE("pipeline: wiener beats the observation and refinement lowers the potential") {
  const Image x = phantom(128, 128);
  auto blur = std::make_shared<const BlurOperator>(BlurOperator::box(128, 128, 5));
  DegradationConfig cfg;
  cfg.noise_seed = 11;
  const auto d = degrade(x, *blur, cfg);
  const Image w = wiener_init(d.observation, *blur, d.noise_std);
  const double peak = dynamic_range(x.pixels);
  CHECK(psnr(x.pixels, w.pixels, peak) > psnr(x.pixels, d.observation.pixels, peak));

  TvDeblurPotential pot(blur, d.observation.pixels, d.noise_std * d.noise_std, 1e-3, 1e-2);
  const double at_truth = pot.value(x.pixels);
  const double at_init = pot.value(w.pixels);
  CHECK(std::isfinite(at_truth));
  CHECK(std::isfinite(at_init));

  // Proximal gradient on f + g with the TV part handled by the subgradient
  // selection; step 1/L_f with L_f = 1/sigma^2 (box blur has |K| <= 1).
  Vector v = w.pixels;
  const double step = d.noise_std * d.noise_std;
  for (int it = 0; it < 500; ++it) {
    const Vector forward = v - step * *pot.smooth_part_gradient(v);
    v = forward / (1.0 + step * 1e-2);
    v -= step * 1e-3 * total_variation_subgradient(v, 128, 128);
  }
  CHECK(pot.value(v) < at_init);
}
