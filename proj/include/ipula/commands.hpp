#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ipula/config.hpp"
#include "ipula/samplers.hpp"

namespace ipula {

// Each command writes into config.output_dir and returns a process exit
// status. Progress and failures go to `log`.
int cmd_sample(const RunConfig& config, std::ostream& log);
int cmd_deblur(const RunConfig& config, std::ostream& log);
int cmd_verify(const RunConfig& config, std::ostream& log);
int cmd_bounds(const RunConfig& config, std::ostream& log);

// Dispatches on config.experiment.
int run_experiment(const RunConfig& config, std::ostream& log);

// Per-method results of a deblurring run, as written to
// methods_summary.csv.
struct MethodSummary {
  SamplerKind kind = SamplerKind::Ipula;
  // Maxima over post-burn-in iterates.
  double best_psnr = 0.0;
  double best_ssim = 0.0;
  // PSNR of the lowest-potential post-burn-in sample and of the
  // post-burn-in mean.
  double best_potential_psnr = 0.0;
  double posterior_mean_psnr = 0.0;
  // Lag-10 autocorrelation of the post-burn-in potential sequence.
  double acf_lag10 = 0.0;
  double wall_seconds = 0.0;
};

struct DeblurReport {
  double observation_psnr = 0.0;
  double wiener_psnr = 0.0;
  double noise_std = 0.0;
  std::vector<MethodSummary> methods;
};

// The deblurring pipeline behind cmd_deblur, without the exit-status
// wrapper.
DeblurReport run_deblur(const RunConfig& config, std::ostream& log);

// Shortest round-trip decimal form; "nan" / "inf" / "-inf" otherwise.
std::string format_number(double value);

// Little-endian dump: 8-byte magic "IPULAVEC", uint64 length, doubles.
void write_vector_binary(const Vector& v, const std::filesystem::path& path);
Vector read_vector_binary(const std::filesystem::path& path);

}  // namespace ipula
