#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ipula {

using Vector = Eigen::VectorXd;

enum class ErrorCode {
  DimensionMismatch,
  InvalidArgument,
  NonFiniteIterate,
  MissingGradientNorm,
  MissingExactProx,
  MissingSmoothPart,
  StepSizeOutOfRange,
  ConstantSeries,
  UnsupportedFormat,
  CorruptFile,
  DegenerateBSNR,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require_dimension(const Vector& v, std::size_t n,
                              std::string_view what) {
  if (static_cast<std::size_t>(v.size()) != n) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": expected length " + std::to_string(n) +
                    ", got " + std::to_string(v.size()));
  }
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace ipula
