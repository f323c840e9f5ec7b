#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ipula/envelope.hpp"
#include "ipula/potentials.hpp"
#include "ipula/samplers.hpp"

namespace ipula {

inline constexpr int kSchemaVersion = 1;

enum class Experiment { Sample, Deblur, Verify, Bounds };

std::string_view to_string(Experiment e);

struct PotentialSpec {
  // quadratic | elastic_net | l1
  std::string kind = "quadratic";
  std::size_t dimension = 10;
  double sigma = 1.0;
  // One entry is broadcast to every coordinate.
  std::vector<double> center{0.0};
  double l1_weight = 1.0;
  double quad_weight = 1.0;
};

struct SamplerSpec {
  SamplerKind kind = SamplerKind::Ipula;
  SamplerConfig config{};
  // One entry is broadcast to every coordinate.
  std::vector<double> initial{0.0};
  // Independent chains; replica i uses seed derive_seed(seed, Replicate, i).
  std::size_t replicas = 1;
};

struct ImagingSpec {
  // "phantom" or a path to a PGM/PNG file.
  std::string input = "phantom";
  std::size_t width = 128;
  std::size_t height = 128;
  std::size_t kernel_size = 5;
  double bsnr_db = 40.0;
  double tv_weight = 1e-3;
  double ridge_weight = 1e-2;
  std::vector<SamplerKind> methods{SamplerKind::Ipula, SamplerKind::Myula,
                                   SamplerKind::GradSub, SamplerKind::ProxSub};
  // "range" (max - min of the ground truth) or "one".
  std::string psnr_peak = "range";
  std::size_t acf_max_lag = 50;
  // Record SSIM every this many recorded iterations (1 = all).
  std::size_t ssim_every = 1;
  // png | pgm
  std::string image_format = "png";
};

struct BoundsSpec {
  double sigma = 1.0;
  double gamma = 1.0;
  double eta = 0.1;
  double delta = 0.0;
  std::size_t dimension = 10;
  double b_disc = 0.0;
  double gap0 = 1.0;
  std::size_t k_max = 100;
  // Step-matched constant for the c sqrt(eta) columns.
  double c = 1.0;
  // Adaptive columns use this schedule; absent means constant delta.
  std::optional<ToleranceSchedule> taus;
};

struct VerifySpec {
  // Pathwise transfer checks.
  std::size_t coupled_seeds = 20;
  std::size_t coupled_steps = 1000;
  std::vector<double> deltas{0.01, 0.1, 1.0};
  // Injected error norm is delta * this while the bound keeps delta;
  // values > 1 form a negative control that must fail.
  double injected_delta_multiplier = 1.0;
  // Objective-gap check.
  std::size_t gap_replicas = 500;
  std::size_t gap_steps = 500;
  double gap_epsilon = 0.05;
  // Residual soundness check.
  std::size_t residual_anchors = 1000;
  // Stationary 1-D check.
  std::size_t stationary_chains = 100;
  std::size_t stationary_samples = 100000;
  // Names of checks to run; empty means all.
  std::vector<std::string> checks;
  bool allow_skips = false;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  Experiment experiment = Experiment::Sample;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::size_t threads = 1;
  PotentialSpec potential{};
  SamplerSpec sampler{};
  ImagingSpec imaging{};
  BoundsSpec bounds{};
  VerifySpec verify{};
  // Original document, echoed into summaries.
  std::string source_text;
};

// Parses and validates. Unknown keys, wrong types and violated step-size
// conditions throw Error(ConfigError / StepSizeOutOfRange).
RunConfig parse_config(const std::string& yaml_text);
RunConfig load_config(const std::filesystem::path& path);
void validate_config(const RunConfig& config);

// The deblurring experiment defaults (128x128 phantom, 5x5 box, 40 dB,
// lambda_TV = 1e-3, lambda_2 = 1e-2, gamma = 1e-6, eta = 0.4e-6, 5000 steps).
RunConfig default_deblur_config();

PotentialPtr make_potential(const PotentialSpec& spec);
Vector broadcast(const std::vector<double>& values, std::size_t n,
                 const char* what);

}  // namespace ipula
