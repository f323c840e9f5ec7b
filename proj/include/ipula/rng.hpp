#pragma once

#include <cstdint>
#include <random>

#include "ipula/common.hpp"

namespace ipula {

// Stream identifiers for seed splitting. A single user seed fans out into
// independent streams so each sub-experiment can be reproduced on its own.
enum class Stream : std::uint64_t {
  Chain = 1,
  ErrorInjection = 2,
  Degradation = 3,
  InnerInit = 4,
  Replicate = 5,
};

// SplitMix64 finalizer.
std::uint64_t mix_seed(std::uint64_t x);

// seed for (base, stream, index): mix(mix(base ^ stream) + index).
std::uint64_t derive_seed(std::uint64_t base, Stream stream,
                          std::uint64_t index = 0);

// Standard Gaussian source that counts every scalar it hands out.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

  double draw() {
    ++draws_;
    return normal_(engine_);
  }

  void fill(Vector& out) {
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = draw();
  }

  Vector draw_vector(std::size_t n) {
    Vector v(static_cast<Eigen::Index>(n));
    fill(v);
    return v;
  }

  // Uniform direction on the unit sphere (normalized Gaussian).
  Vector draw_unit_vector(std::size_t n);

  std::uint64_t draw_count() const noexcept { return draws_; }
  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uint64_t draws_ = 0;
};

}  // namespace ipula
