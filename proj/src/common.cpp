#include "ipula/common.hpp"
#include "ipula/rng.hpp"

namespace ipula {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonFiniteIterate: return "NonFiniteIterate";
    case ErrorCode::MissingGradientNorm: return "MissingGradientNorm";
    case ErrorCode::MissingExactProx: return "MissingExactProx";
    case ErrorCode::MissingSmoothPart: return "MissingSmoothPart";
    case ErrorCode::StepSizeOutOfRange: return "StepSizeOutOfRange";
    case ErrorCode::ConstantSeries: return "ConstantSeries";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::DegenerateBSNR: return "DegenerateBSNR";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, Stream stream,
                          std::uint64_t index) {
  const auto tag = static_cast<std::uint64_t>(stream) * 0xd1342543de82ef95ULL;
  return mix_seed(mix_seed(base ^ tag) + index);
}

Vector GaussianStream::draw_unit_vector(std::size_t n) {
  Vector v = draw_vector(n);
  double norm = v.norm();
  while (norm == 0.0) {
    fill(v);
    norm = v.norm();
  }
  return v / norm;
}

}  // namespace ipula
