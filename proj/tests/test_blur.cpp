#include "doctest.h"

#include <random>

#include "ipula/blur.hpp"
#include "oracles.hpp"

using namespace ipula;

TEST_CASE("box blur preserves constants") {
  auto h = BlurOperator::box(32, 20, 5);
  CHECK(h.kernel().sum() == doctest::Approx(1.0));
  const Vector c = Vector::Constant(640, 0.42);
  CHECK((h.apply(c) - c).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("impulse response is the kernel stamped with wrap-around") {
  const std::size_t w = 9, hgt = 7;
  Eigen::MatrixXd k(3, 3);
  k << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  BlurOperator h(w, hgt, k / 45.0);
  Vector delta = Vector::Zero(static_cast<Eigen::Index>(w * hgt));
  delta[0] = 1.0;  // corner pixel: stamp wraps on both axes
  const Vector out = h.apply(delta);
  for (long i = -1; i <= 1; ++i) {
    for (long j = -1; j <= 1; ++j) {
      const long r = (i + 7) % 7;
      const long c = (j + 9) % 9;
      CHECK(out[r * 9 + c] == doctest::Approx(k(i + 1, j + 1) / 45.0).epsilon(1e-12));
    }
  }
  CHECK(out.sum() == doctest::Approx(1.0));
}

TEST_CASE("FFT blur agrees with direct circular convolution") {
  std::mt19937_64 rng(2);
  Eigen::MatrixXd k = Eigen::MatrixXd::Random(5, 3).cwiseAbs();
  BlurOperator h(12, 10, k);
  const Vector x = oracle::random_vector(rng, 120);
  const Vector direct = oracle::direct_circular_blur(x, 12, 10, k);
  CHECK((h.apply(x) - direct).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("adjoint identity on random pairs") {
  std::mt19937_64 rng(4);
  Eigen::MatrixXd k = Eigen::MatrixXd::Random(5, 5);
  BlurOperator h(16, 13, k);
  for (int t = 0; t < 100; ++t) {
    const Vector x = oracle::random_vector(rng, 208);
    const Vector z = oracle::random_vector(rng, 208);
    const double lhs = h.apply(x).dot(z);
    const double rhs = x.dot(h.adjoint(z));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    CHECK((h.apply_normal(x) - h.adjoint(h.apply(x))).norm() <
          1e-10 * (1.0 + x.norm()));
  }
  auto box = BlurOperator::box(16, 13, 5);
  const Vector x = oracle::random_vector(rng, 208);
  CHECK((box.apply(x) - box.adjoint(x)).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("blur input validation") {
  CHECK_THROWS_AS(BlurOperator::box(8, 8, 4), Error);
  CHECK_THROWS_AS(BlurOperator::box(3, 3, 5), Error);
  auto h = BlurOperator::box(8, 8, 3);
  CHECK_THROWS_AS(h.apply(Vector::Zero(10)), Error);
}
