#include "ipula/commands.hpp"

#include <fmt/format.h>

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "ipula/diagnostics.hpp"
#include "ipula/imaging.hpp"
#include "ipula/parallel.hpp"
#include "ipula/potentials.hpp"
#include "ipula/rng.hpp"
#include "ipula/verify.hpp"

namespace ipula {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr char kVectorMagic[8] = {'I', 'P', 'U', 'L', 'A', 'V', 'E', 'C'};
constexpr std::size_t kAcfReportLag = 10;

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::string& title,
            const std::vector<std::string>& columns)
      : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    std::string header;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      header += (i ? "," : "") + columns[i];
    }
    out_ << "# " << title << "; columns: " << header << '\n' << header << '\n';
    width_ = columns.size();
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) {
      throw Error(ErrorCode::InvalidArgument,
                  "csv row width mismatch in " + path_.string());
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out_ << (i ? "," : "") << cells[i];
    }
    out_ << '\n';
  }

  ~CsvWriter() { out_.flush(); }

 private:
  std::ofstream out_;
  fs::path path_;
  std::size_t width_ = 0;
};

std::string num(double v) { return format_number(v); }
std::string num(std::size_t v) { return std::to_string(v); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path prepare_output(const RunConfig& c) {
  fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::IoError,
                "cannot create output directory " + dir.string() + ": " + ec.message());
  }
  return dir;
}

json config_echo(const RunConfig& c) {
  json j;
  j["experiment"] = std::string(to_string(c.experiment));
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["source"] = c.source_text;
  return j;
}

json sampler_echo(const SamplerSpec& s) {
  const auto& c = s.config;
  json j;
  j["kind"] = std::string(to_string(s.kind));
  j["gamma"] = c.gamma;
  j["eta"] = c.eta;
  j["steps"] = c.steps;
  j["record_every"] = c.record_every;
  j["burn_in_fraction"] = c.burn_in_fraction;
  j["inner_max_iterations"] = c.inner.max_inner_iterations;
  return j;
}

std::vector<std::string> trace_columns() {
  return {"k", "potential_value", "envelope_upper", "residual", "tolerance",
          "inner_iters"};
}

void write_trace(const ChainTrace& trace, const fs::path& path) {
  CsvWriter csv(path, "ipula trace", trace_columns());
  for (const auto& r : trace.iterations) {
    csv.row({num(r.k), num(r.potential_value), num(r.envelope_upper),
             num(r.residual), num(r.tolerance_used), num(r.inner_iterations)});
  }
}

std::size_t burn_in_index(const SamplerConfig& c) {
  return static_cast<std::size_t>(
      std::floor(c.burn_in_fraction * static_cast<double>(c.steps)));
}

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return fmt::format("{}", value);
}

void write_vector_binary(const Vector& v, const fs::path& path) {
  static_assert(std::endian::native == std::endian::little,
                "binary dumps assume a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(kVectorMagic, sizeof kVectorMagic);
  const std::uint64_t n = static_cast<std::uint64_t>(v.size());
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
}

Vector read_vector_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  char magic[8];
  std::uint64_t n = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || std::memcmp(magic, kVectorMagic, sizeof magic) != 0) {
    throw Error(ErrorCode::CorruptFile, path.string() + ": not a vector dump");
  }
  Vector v(static_cast<Eigen::Index>(n));
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw Error(ErrorCode::CorruptFile, path.string() + ": truncated");
  return v;
}

// --- sample -----------------------------------------------------------------

int cmd_sample(const RunConfig& config, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = prepare_output(config);
  const PotentialPtr potential = make_potential(config.potential);
  const Vector x0 =
      broadcast(config.sampler.initial, potential->dimension(), "sampler.initial");
  const std::size_t reps = config.sampler.replicas;

  std::vector<ChainTrace> traces(reps);
  parallel_for(reps, config.threads, [&](std::size_t i) {
    SamplerConfig c = config.sampler.config;
    c.seed = derive_seed(config.seed, Stream::Replicate, i);
    traces[i] = run_chain(config.sampler.kind, potential, c, x0);
  });

  write_trace(traces[0], dir / "trace.csv");
  write_vector_binary(traces[0].final_state, dir / "final_state.bin");

  std::uint64_t draws = 0;
  std::size_t unconverged = 0;
  for (const auto& t : traces) {
    draws += t.rng_draw_count;
    for (const auto& r : t.iterations) unconverged += r.converged ? 0 : 1;
  }

  if (reps > 1) {
    CsvWriter csv(dir / "aggregate.csv", "ipula replica aggregate",
                  {"k", "replicas", "mean_potential", "se_potential",
                   "mean_envelope_upper", "mean_residual"});
    const std::size_t rows = traces[0].iterations.size();
    std::vector<double> pot(reps), sq(reps), env(reps), res(reps);
    const double r = static_cast<double>(reps);
    for (std::size_t j = 0; j < rows; ++j) {
      for (std::size_t i = 0; i < reps; ++i) {
        const auto& rec = traces[i].iterations[j];
        pot[i] = rec.potential_value;
        env[i] = rec.envelope_upper;
        res[i] = rec.residual;
      }
      const double mean = pairwise_sum(pot) / r;
      for (std::size_t i = 0; i < reps; ++i) sq[i] = (pot[i] - mean) * (pot[i] - mean);
      const double se = std::sqrt(pairwise_sum(sq) / (r - 1.0) / r);
      csv.row({num(traces[0].iterations[j].k), num(reps), num(mean), num(se),
               num(pairwise_sum(env) / r), num(pairwise_sum(res) / r)});
    }
  }

  json summary;
  summary["schema_version"] = kSchemaVersion;
  summary["runtime_seconds"] = seconds_since(t0);
  summary["rng_draw_count"] = draws;
  summary["replicas"] = reps;
  summary["recorded_rows"] = traces[0].iterations.size();
  summary["unconverged_inner_solves"] = unconverged;
  summary["potential"] = config.potential.kind;
  summary["sampler"] = sampler_echo(config.sampler);
  summary["config"] = config_echo(config);
  write_json(summary, dir / "summary.json");
  log << "sample: " << traces[0].iterations.size() << " rows x " << reps
      << " replica(s) written to " << dir.string() << '\n';
  return 0;
}

// --- deblur -----------------------------------------------------------------

DeblurReport run_deblur(const RunConfig& config, std::ostream& log) {
  const ImagingSpec& im = config.imaging;
  const fs::path dir = prepare_output(config);

  Image truth = im.input == "phantom" ? phantom(im.width, im.height)
                                      : load_image(im.input);
  const std::size_t w = truth.width, h = truth.height;
  auto blur = std::make_shared<const BlurOperator>(BlurOperator::box(w, h, im.kernel_size));
  DegradationConfig dc;
  dc.kernel_size = im.kernel_size;
  dc.bsnr_db = im.bsnr_db;
  dc.noise_seed = derive_seed(config.seed, Stream::Degradation);
  const Degradation deg = degrade(truth, *blur, dc);
  if (!(deg.noise_std > 0.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "deblur needs a finite bsnr_db (the likelihood needs noise)");
  }
  const Image init = wiener_init(deg.observation, *blur, deg.noise_std);
  auto potential = std::make_shared<const TvDeblurPotential>(
      blur, deg.observation.pixels, deg.noise_std * deg.noise_std, im.tv_weight,
      im.ridge_weight);

  const double peak = im.psnr_peak == "range" ? dynamic_range(truth.pixels) : 1.0;
  SsimOptions so;
  so.peak = peak;
  const auto ext = "." + im.image_format;

  DeblurReport report;
  report.noise_std = deg.noise_std;
  report.observation_psnr = psnr(truth.pixels, deg.observation.pixels, peak);
  report.wiener_psnr = psnr(truth.pixels, init.pixels, peak);
  save_image(truth, dir / ("ground_truth" + ext));
  save_image(deg.observation, dir / ("observation" + ext));
  save_image(init, dir / ("wiener_init" + ext));
  log << "deblur: " << w << "x" << h << ", noise std " << format_number(deg.noise_std)
      << ", observation PSNR " << format_number(report.observation_psnr)
      << " dB, Wiener PSNR " << format_number(report.wiener_psnr) << " dB\n";

  const SamplerConfig& base = config.sampler.config;
  const std::size_t burn = burn_in_index(base);
  report.methods.resize(im.methods.size());

  parallel_for(im.methods.size(), config.threads, [&](std::size_t mi) {
    const auto t0 = std::chrono::steady_clock::now();
    const SamplerKind kind = im.methods[mi];
    const fs::path mdir = dir / std::string(to_string(kind));
    fs::create_directories(mdir);
    SamplerConfig c = base;
    c.seed = config.seed;

    MethodSummary& s = report.methods[mi];
    s.kind = kind;
    s.best_psnr = -std::numeric_limits<double>::infinity();
    s.best_ssim = -std::numeric_limits<double>::infinity();
    double best_potential = std::numeric_limits<double>::infinity();
    Vector best_state = init.pixels;
    Vector mean_sum = Vector::Zero(init.pixels.size());
    std::size_t mean_count = 0;
    std::vector<double> post_potentials;
    std::size_t recorded = 0;

    CsvWriter metrics(mdir / "metrics.csv", "ipula deblur metrics",
                      {"k", "potential", "psnr", "ssim"});
    run_chain(kind, potential, c, init.pixels,
              [&](std::size_t k, const Vector& x, const ChainRecord& rec) {
                const double p = psnr(truth.pixels, x, peak);
                double q = std::numeric_limits<double>::quiet_NaN();
                if (recorded++ % im.ssim_every == 0) {
                  q = ssim(truth.pixels, x, w, h, so);
                }
                metrics.row({num(k), num(rec.potential_value), num(p), num(q)});
                if (k < burn) return;
                s.best_psnr = std::max(s.best_psnr, p);
                if (!std::isnan(q)) s.best_ssim = std::max(s.best_ssim, q);
                if (rec.potential_value < best_potential) {
                  best_potential = rec.potential_value;
                  best_state = x;
                }
                mean_sum += x;
                ++mean_count;
                post_potentials.push_back(rec.potential_value);
              });

    const Vector mean = mean_sum / static_cast<double>(std::max<std::size_t>(1, mean_count));
    s.best_potential_psnr = psnr(truth.pixels, best_state, peak);
    s.posterior_mean_psnr = psnr(truth.pixels, mean, peak);
    const std::size_t max_lag =
        std::min(im.acf_max_lag, post_potentials.empty() ? 0 : post_potentials.size() - 1);
    std::vector<double> rho;
    try {
      rho = acf(post_potentials, max_lag);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ConstantSeries) throw;
      rho.assign(max_lag + 1, std::numeric_limits<double>::quiet_NaN());
    }
    {
      CsvWriter out(mdir / "acf.csv", "ipula potential autocorrelation",
                    {"lag", "acf"});
      for (std::size_t l = 0; l < rho.size(); ++l) out.row({num(l), num(rho[l])});
    }
    s.acf_lag10 = rho.size() > kAcfReportLag ? rho[kAcfReportLag]
                                             : std::numeric_limits<double>::quiet_NaN();
    save_image(Image(w, h, best_state, truth.bit_depth), mdir / ("best_potential" + ext));
    save_image(Image(w, h, mean, truth.bit_depth), mdir / ("posterior_mean" + ext));
    s.wall_seconds = seconds_since(t0);
  });

  for (const auto& s : report.methods) {
    log << "  " << to_string(s.kind) << ": best PSNR " << format_number(s.best_psnr)
        << " dB, best SSIM " << format_number(s.best_ssim) << ", lag-10 ACF "
        << format_number(s.acf_lag10) << ", " << format_number(s.wall_seconds) << " s\n";
  }
  return report;
}

int cmd_deblur(const RunConfig& config, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const DeblurReport report = run_deblur(config, log);
  const fs::path dir(config.output_dir);

  // Wall time lives in summary.json so the CSV stays byte-stable.
  CsvWriter csv(dir / "methods_summary.csv", "ipula deblur comparison",
                {"method", "best_psnr", "best_ssim", "best_potential_psnr",
                 "posterior_mean_psnr", "acf_lag10"});
  json methods = json::array();
  for (const auto& s : report.methods) {
    csv.row({std::string(to_string(s.kind)), num(s.best_psnr), num(s.best_ssim),
             num(s.best_potential_psnr), num(s.posterior_mean_psnr),
             num(s.acf_lag10)});
    json m;
    m["method"] = std::string(to_string(s.kind));
    m["best_psnr"] = s.best_psnr;
    m["best_ssim"] = s.best_ssim;
    m["wall_seconds"] = s.wall_seconds;
    methods.push_back(m);
  }
  json summary;
  summary["schema_version"] = kSchemaVersion;
  summary["runtime_seconds"] = seconds_since(t0);
  summary["observation_psnr"] = report.observation_psnr;
  summary["wiener_psnr"] = report.wiener_psnr;
  summary["noise_std"] = report.noise_std;
  summary["methods"] = methods;
  summary["sampler"] = sampler_echo(config.sampler);
  summary["config"] = config_echo(config);
  write_json(summary, dir / "summary.json");
  return 0;
}

// --- verify -----------------------------------------------------------------

int cmd_verify(const RunConfig& config, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = prepare_output(config);
  const auto results = run_verify_suite(config.verify, config.seed, config.threads);
  const bool pass = suite_passes(results, config.verify.allow_skips);

  json checks = json::array();
  for (const auto& r : results) {
    json j;
    j["name"] = r.name;
    j["group"] = r.group;
    j["bound"] = r.bound;
    j["observed"] = r.observed;
    j["margin"] = r.margin;
    j["pass"] = r.pass;
    j["skipped"] = r.skipped;
    j["detail"] = r.detail;
    checks.push_back(j);
    const char* tag = r.skipped ? "SKIP" : (r.pass ? "PASS" : "FAIL");
    log << tag << ' ' << r.name;
    if (!r.skipped) {
      log << ": observed " << format_number(r.observed) << ", bound "
          << format_number(r.bound);
    }
    log << " (" << r.detail << ")\n";
  }
  json report;
  report["schema_version"] = kSchemaVersion;
  report["pass"] = pass;
  report["allow_skips"] = config.verify.allow_skips;
  report["injected_delta_multiplier"] = config.verify.injected_delta_multiplier;
  report["runtime_seconds"] = seconds_since(t0);
  report["checks"] = checks;
  report["config"] = config_echo(config);
  write_json(report, dir / "verify_report.json");
  log << (pass ? "verify: all checks passed\n" : "verify: FAILED\n");
  return pass ? 0 : 1;
}

// --- bounds -----------------------------------------------------------------

int cmd_bounds(const RunConfig& config, std::ostream& log) {
  const fs::path dir = prepare_output(config);
  const BoundsSpec& b = config.bounds;
  const auto p = BoundParams::make(b.sigma, b.gamma, b.eta, b.delta, b.dimension, b.b_disc);
  const std::size_t K = b.k_max;

  std::vector<double> taus(K);
  for (std::size_t k = 0; k < K; ++k) {
    taus[k] = b.taus ? evaluate_schedule(*b.taus, k) : b.delta;
  }
  const double rho = contraction_rho(p);
  std::optional<double> q;
  try {
    q = coupling_q(p);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::StepSizeOutOfRange) throw;
    log << "bounds: transfer columns disabled: " << e.what() << '\n';
  }
  const auto gap_adaptive = adaptive_gap_curve(p, K, b.gap0, taus);
  std::vector<double> transfer_adaptive;
  if (q) transfer_adaptive = adaptive_transfer_curve(p, K, taus);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  {
    CsvWriter csv(dir / "bounds.csv", "ipula bound curves",
                  {"k", "gap_fixed", "gap_adaptive", "gap_step_matched",
                   "transfer_fixed", "transfer_adaptive", "tau"});
    for (std::size_t k = 0; k <= K; ++k) {
      csv.row({num(k), num(fixed_gap_bound(p, k, b.gap0)), num(gap_adaptive[k]),
               num(step_matched_gap_bound(p, b.c, k, b.gap0)),
               num(q ? transfer_bound(p, k) : nan),
               num(q ? transfer_adaptive[k] : nan), num(k < K ? taus[k] : nan)});
    }
  }
  const auto sm = step_matched_terms(p, b.c);
  json j;
  j["schema_version"] = kSchemaVersion;
  j["m_gamma"] = p.m_gamma;
  j["l_gamma"] = p.l_gamma;
  j["rho"] = rho;
  j["q"] = q ? json(*q) : json(nullptr);
  j["stationary_floor"] = q ? json(stationary_floor(p)) : json(nullptr);
  j["step_matched_noise_floor"] = sm.noise_floor;
  j["step_matched_oracle_floor"] = sm.oracle_floor;
  j["config"] = config_echo(config);
  write_json(j, dir / "bounds.json");
  log << "bounds: " << K + 1 << " rows written to " << (dir / "bounds.csv").string()
      << '\n';
  return 0;
}

int run_experiment(const RunConfig& config, std::ostream& log) {
  switch (config.experiment) {
    case Experiment::Sample: return cmd_sample(config, log);
    case Experiment::Deblur: return cmd_deblur(config, log);
    case Experiment::Verify: return cmd_verify(config, log);
    case Experiment::Bounds: return cmd_bounds(config, log);
  }
  return 2;
}

}  // namespace ipula
