#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "ipula/commands.hpp"
#include "ipula/config.hpp"

namespace {

// Exit statuses: 0 success, 1 failed check, 2 invalid config, 3 runtime
// error.
constexpr int kConfigFailure = 2;
constexpr int kRuntimeFailure = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inexact proximal Langevin sampling toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;

  const std::pair<const char*, ipula::Experiment> commands[] = {
      {"sample", ipula::Experiment::Sample},
      {"deblur", ipula::Experiment::Deblur},
      {"verify", ipula::Experiment::Verify},
      {"bounds", ipula::Experiment::Bounds},
  };
  const char* help[] = {
      "Run a sampler on a configured potential",
      "Run the deblurring comparison end to end",
      "Run the property suite and write verify_report.json",
      "Write bound curves for the configured constants",
  };
  std::optional<ipula::Experiment> chosen;
  for (std::size_t i = 0; i < 4; ++i) {
    auto* sub = app.add_subcommand(commands[i].first, help[i]);
    sub->add_option("--config", config_path, "YAML config file");
    sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
    sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "Seed override");
    sub->callback([&chosen, e = commands[i].second] { chosen = e; });
  }
  CLI11_PARSE(app, argc, argv);

  try {
    ipula::RunConfig config;
    if (config_path.empty()) {
      // Without a file, deblur runs its default experiment; other commands
      // use built-in defaults.
      config = *chosen == ipula::Experiment::Deblur ? ipula::default_deblur_config()
                                                    : ipula::RunConfig{};
      config.experiment = *chosen;
    } else {
      config = ipula::load_config(config_path);
    }
    if (config.experiment != *chosen) {
      std::cerr << "config error: config declares experiment '"
                << ipula::to_string(config.experiment) << "' but the subcommand is '"
                << ipula::to_string(*chosen) << "'\n";
      return kConfigFailure;
    }
    if (out_dir) config.output_dir = *out_dir;
    if (threads) config.threads = *threads;
    if (seed) config.seed = *seed;
    ipula::validate_config(config);
    return ipula::run_experiment(config, std::cout);
  } catch (const ipula::Error& e) {
    const auto code = e.code();
    const bool config_problem = code == ipula::ErrorCode::ConfigError ||
                                code == ipula::ErrorCode::StepSizeOutOfRange;
    std::cerr << (config_problem ? "config error [" : "error [")
              << ipula::to_string(code) << "]: " << e.what() << '\n';
    return config_problem ? kConfigFailure : kRuntimeFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}
