#include "ipula/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>
#include <sstream>

namespace ipula {

namespace {

[[noreturn]] void config_error(const std::string& where,
                               const std::string& what) {
  throw Error(ErrorCode::ConfigError, where + ": " + what);
}

void reject_unknown(const YAML::Node& node, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) config_error(where, "expected a mapping");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) config_error(where, "unknown key '" + key + "'");
  }
}

template <class T>
void read(const YAML::Node& node, const char* key, T& out,
          const std::string& where) {
  const YAML::Node v = node[key];
  if (!v) return;
  try {
    out = v.as<T>();
  } catch (const YAML::Exception&) {
    config_error(where + "." + key, "wrong type");
  }
}

void read_double(const YAML::Node& node, const char* key, double& out,
                 const std::string& where) {
  const YAML::Node v = node[key];
  if (!v) return;
  const auto text = v.as<std::string>();
  if (text == "inf" || text == ".inf" || text == "infinity") {
    out = std::numeric_limits<double>::infinity();
    return;
  }
  read(node, key, out, where);
}

void read_list(const YAML::Node& node, const char* key,
               std::vector<double>& out, const std::string& where) {
  const YAML::Node v = node[key];
  if (!v) return;
  try {
    if (v.IsSequence()) {
      out = v.as<std::vector<double>>();
    } else {
      out = {v.as<double>()};
    }
  } catch (const YAML::Exception&) {
    config_error(where + "." + key, "expected a number or list of numbers");
  }
}

ToleranceSchedule parse_schedule(const YAML::Node& node,
                                 const std::string& where) {
  reject_unknown(node, where, {"kind", "eps", "c", "eta", "alpha"});
  std::string kind;
  read(node, "kind", kind, where);
  if (kind == "fixed") {
    schedule::Fixed s{1e-6};
    read_double(node, "eps", s.eps, where);
    return s;
  }
  if (kind == "step_matched") {
    schedule::StepMatched s{1.0, std::numeric_limits<double>::quiet_NaN()};
    read_double(node, "c", s.c, where);
    read_double(node, "eta", s.eta, where);
    return s;
  }
  if (kind == "decaying") {
    schedule::Decaying s{1.0, 1.0};
    read_double(node, "c", s.c, where);
    read_double(node, "alpha", s.alpha, where);
    return s;
  }
  if (kind == "relative") {
    schedule::Relative s{0.1};
    read_double(node, "c", s.c, where);
    return s;
  }
  config_error(where + ".kind",
               "expected fixed | step_matched | decaying | relative, got '" +
                   kind + "'");
}

StepRule parse_step_rule(const std::string& s, const std::string& where) {
  if (s == "strongly_convex") return StepRule::StronglyConvexDecay;
  if (s == "inverse_sqrt") return StepRule::ConstantOverSqrtK;
  config_error(where, "expected strongly_convex | inverse_sqrt, got '" + s + "'");
}

SamplerKind parse_kind(const std::string& s, const std::string& where) {
  try {
    return parse_sampler_kind(s);
  } catch (const Error&) {
    config_error(where,
                 "expected ipula | exact_ula | myula | gradsub | proxsub, got '" +
                     s + "'");
  }
}

// Step-matched schedules default their eta to the sampler's eta.
void bind_schedule_eta(ToleranceSchedule& s, double eta) {
  if (auto* m = std::get_if<schedule::StepMatched>(&s)) {
    if (std::isnan(m->eta)) m->eta = eta;
  }
}

void parse_potential(const YAML::Node& node, PotentialSpec& p) {
  const std::string w = "potential";
  reject_unknown(node, w,
                 {"kind", "dimension", "sigma", "center", "l1_weight",
                  "quad_weight"});
  read(node, "kind", p.kind, w);
  read(node, "dimension", p.dimension, w);
  read_double(node, "sigma", p.sigma, w);
  read_list(node, "center", p.center, w);
  read_double(node, "l1_weight", p.l1_weight, w);
  read_double(node, "quad_weight", p.quad_weight, w);
}

void parse_sampler(const YAML::Node& node, SamplerSpec& s) {
  const std::string w = "sampler";
  reject_unknown(node, w,
                 {"kind", "gamma", "eta", "steps", "record_every",
                  "burn_in_fraction", "schedule", "inner", "initial",
                  "replicas", "gprox_tolerance_factor", "track_envelope",
                  "store_states"});
  std::string kind;
  read(node, "kind", kind, w);
  if (!kind.empty()) s.kind = parse_kind(kind, w + ".kind");
  auto& c = s.config;
  read_double(node, "gamma", c.gamma, w);
  read_double(node, "eta", c.eta, w);
  read(node, "steps", c.steps, w);
  read(node, "record_every", c.record_every, w);
  read_double(node, "burn_in_fraction", c.burn_in_fraction, w);
  read_double(node, "gprox_tolerance_factor", c.gprox_tolerance_factor, w);
  read(node, "track_envelope", c.track_envelope, w);
  read(node, "store_states", c.store_states, w);
  read_list(node, "initial", s.initial, w);
  read(node, "replicas", s.replicas, w);
  if (node["schedule"]) c.schedule = parse_schedule(node["schedule"], w + ".schedule");
  if (const YAML::Node inner = node["inner"]) {
    const std::string wi = w + ".inner";
    reject_unknown(inner, wi,
                   {"max_iterations", "step_rule", "use_exact_prox",
                    "snap_kinks", "strong_convexity_hint"});
    read(inner, "max_iterations", c.inner.max_inner_iterations, wi);
    std::string rule;
    read(inner, "step_rule", rule, wi);
    if (!rule.empty()) c.inner.step_rule = parse_step_rule(rule, wi + ".step_rule");
    read(inner, "use_exact_prox", c.inner.use_exact_prox, wi);
    read(inner, "snap_kinks", c.inner.snap_kinks, wi);
    read_double(inner, "strong_convexity_hint", c.inner.strong_convexity_hint, wi);
  }
}

void parse_imaging(const YAML::Node& node, ImagingSpec& im) {
  const std::string w = "imaging";
  reject_unknown(node, w,
                 {"input", "width", "height", "kernel_size", "bsnr_db",
                  "tv_weight", "ridge_weight", "methods", "psnr_peak",
                  "acf_max_lag", "ssim_every", "image_format"});
  read(node, "input", im.input, w);
  read(node, "width", im.width, w);
  read(node, "height", im.height, w);
  read(node, "kernel_size", im.kernel_size, w);
  read_double(node, "bsnr_db", im.bsnr_db, w);
  read_double(node, "tv_weight", im.tv_weight, w);
  read_double(node, "ridge_weight", im.ridge_weight, w);
  read(node, "psnr_peak", im.psnr_peak, w);
  read(node, "acf_max_lag", im.acf_max_lag, w);
  read(node, "ssim_every", im.ssim_every, w);
  read(node, "image_format", im.image_format, w);
  if (const YAML::Node m = node["methods"]) {
    if (!m.IsSequence()) config_error(w + ".methods", "expected a list");
    im.methods.clear();
    for (const auto& item : m) {
      im.methods.push_back(parse_kind(item.as<std::string>(), w + ".methods"));
    }
  }
}

void parse_bounds(const YAML::Node& node, BoundsSpec& b) {
  const std::string w = "bounds";
  reject_unknown(node, w,
                 {"sigma", "gamma", "eta", "delta", "dimension", "b_disc",
                  "gap0", "k_max", "c", "taus"});
  read_double(node, "sigma", b.sigma, w);
  read_double(node, "gamma", b.gamma, w);
  read_double(node, "eta", b.eta, w);
  read_double(node, "delta", b.delta, w);
  read(node, "dimension", b.dimension, w);
  read_double(node, "b_disc", b.b_disc, w);
  read_double(node, "gap0", b.gap0, w);
  read(node, "k_max", b.k_max, w);
  read_double(node, "c", b.c, w);
  if (node["taus"]) b.taus = parse_schedule(node["taus"], w + ".taus");
}

void parse_verify(const YAML::Node& node, VerifySpec& v) {
  const std::string w = "verify";
  reject_unknown(node, w,
                 {"coupled_seeds", "coupled_steps", "deltas",
                  "injected_delta_multiplier", "gap_replicas", "gap_steps",
                  "gap_epsilon", "residual_anchors", "stationary_chains",
                  "stationary_samples", "checks", "allow_skips"});
  read(node, "coupled_seeds", v.coupled_seeds, w);
  read(node, "coupled_steps", v.coupled_steps, w);
  read_list(node, "deltas", v.deltas, w);
  read_double(node, "injected_delta_multiplier", v.injected_delta_multiplier, w);
  read(node, "gap_replicas", v.gap_replicas, w);
  read(node, "gap_steps", v.gap_steps, w);
  read_double(node, "gap_epsilon", v.gap_epsilon, w);
  read(node, "residual_anchors", v.residual_anchors, w);
  read(node, "stationary_chains", v.stationary_chains, w);
  read(node, "stationary_samples", v.stationary_samples, w);
  read(node, "checks", v.checks, w);
  read(node, "allow_skips", v.allow_skips, w);
}

Experiment parse_experiment(const std::string& s) {
  if (s == "sample") return Experiment::Sample;
  if (s == "deblur") return Experiment::Deblur;
  if (s == "verify") return Experiment::Verify;
  if (s == "bounds") return Experiment::Bounds;
  config_error("experiment",
               "expected sample | deblur | verify | bounds, got '" + s + "'");
}

}  // namespace

std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::Sample: return "sample";
    case Experiment::Deblur: return "deblur";
    case Experiment::Verify: return "verify";
    case Experiment::Bounds: return "bounds";
  }
  return "unknown";
}

RunConfig default_deblur_config() {
  RunConfig c;
  c.experiment = Experiment::Deblur;
  c.sampler.kind = SamplerKind::Ipula;
  auto& s = c.sampler.config;
  s.gamma = 1e-6;
  s.eta = 0.4e-6;
  s.steps = 5000;
  s.record_every = 1;
  s.burn_in_fraction = 0.2;
  s.schedule = schedule::StepMatched{1.0, 0.4e-6};
  s.inner.max_inner_iterations = 20;
  s.track_envelope = false;
  return c;
}

RunConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    config_error("config", std::string("not valid YAML: ") + e.what());
  }
  if (!root || !root.IsMap()) config_error("config", "expected a mapping");
  reject_unknown(root, "config",
                 {"schema_version", "experiment", "seed", "output_dir",
                  "threads", "potential", "sampler", "imaging", "bounds",
                  "verify"});
  if (!root["schema_version"]) {
    config_error("schema_version", "missing (expected 1)");
  }
  int version = 0;
  read(root, "schema_version", version, "config");
  if (version != kSchemaVersion) {
    config_error("schema_version",
                 "unsupported version " + std::to_string(version) +
                     " (expected 1)");
  }
  std::string experiment;
  read(root, "experiment", experiment, "config");
  if (experiment.empty()) config_error("experiment", "missing");
  const Experiment kind = parse_experiment(experiment);

  RunConfig c = kind == Experiment::Deblur ? default_deblur_config() : RunConfig{};
  c.experiment = kind;
  c.schema_version = version;
  c.source_text = yaml_text;
  read(root, "seed", c.seed, "config");
  read(root, "output_dir", c.output_dir, "config");
  read(root, "threads", c.threads, "config");
  if (root["potential"]) parse_potential(root["potential"], c.potential);
  if (root["sampler"]) parse_sampler(root["sampler"], c.sampler);
  if (root["imaging"]) parse_imaging(root["imaging"], c.imaging);
  if (root["bounds"]) parse_bounds(root["bounds"], c.bounds);
  if (root["verify"]) parse_verify(root["verify"], c.verify);

  bind_schedule_eta(c.sampler.config.schedule, c.sampler.config.eta);
  if (c.bounds.taus) bind_schedule_eta(*c.bounds.taus, c.bounds.eta);
  validate_config(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate_config(const RunConfig& c) {
  if (c.threads == 0) config_error("threads", "must be >= 1");
  if (c.output_dir.empty()) config_error("output_dir", "must not be empty");
  switch (c.experiment) {
    case Experiment::Sample: {
      c.sampler.config.validate();
      if (c.sampler.replicas == 0) config_error("sampler.replicas", "must be >= 1");
      make_potential(c.potential);
      broadcast(c.sampler.initial, c.potential.dimension, "sampler.initial");
      break;
    }
    case Experiment::Deblur: {
      c.sampler.config.validate();
      const auto& im = c.imaging;
      if (im.kernel_size % 2 == 0) config_error("imaging.kernel_size", "must be odd");
      if (!(im.tv_weight >= 0.0)) config_error("imaging.tv_weight", "must be >= 0");
      if (!(im.ridge_weight > 0.0)) config_error("imaging.ridge_weight", "must be > 0");
      if (im.methods.empty()) config_error("imaging.methods", "must not be empty");
      for (auto m : im.methods) {
        if (m == SamplerKind::ExactUla) {
          config_error("imaging.methods", "exact_ula needs a closed-form prox");
        }
      }
      if (im.psnr_peak != "range" && im.psnr_peak != "one") {
        config_error("imaging.psnr_peak", "expected range | one");
      }
      if (im.image_format != "png" && im.image_format != "pgm") {
        config_error("imaging.image_format", "expected png | pgm");
      }
      if (im.ssim_every == 0) config_error("imaging.ssim_every", "must be >= 1");
      if (std::isnan(im.bsnr_db)) config_error("imaging.bsnr_db", "must be a number");
      break;
    }
    case Experiment::Bounds: {
      const auto& b = c.bounds;
      if (!(b.sigma > 0.0)) config_error("bounds.sigma", "must be > 0");
      if (!(b.gamma > 0.0)) config_error("bounds.gamma", "must be > 0");
      if (!(b.eta > 0.0 && b.eta < 0.5 * b.gamma)) {
        std::ostringstream os;
        os << "objective-gap bound requires eta in (0, 1/(2 L_gamma)) = (0, "
           << 0.5 * b.gamma << "), got " << b.eta;
        throw Error(ErrorCode::StepSizeOutOfRange, os.str());
      }
      if (!(b.delta >= 0.0)) config_error("bounds.delta", "must be >= 0");
      if (!(b.b_disc >= 0.0)) config_error("bounds.b_disc", "must be >= 0");
      if (b.taus) {
        if (needs_gradient_norm(*b.taus)) {
          config_error("bounds.taus", "relative schedules depend on a trajectory");
        }
        validate_schedule(*b.taus);
      }
      break;
    }
    case Experiment::Verify: {
      const auto& v = c.verify;
      if (v.coupled_seeds == 0 || v.coupled_steps == 0) {
        config_error("verify", "coupled_seeds and coupled_steps must be >= 1");
      }
      if (!(v.injected_delta_multiplier > 0.0)) {
        config_error("verify.injected_delta_multiplier", "must be > 0");
      }
      if (v.gap_replicas < 2) config_error("verify.gap_replicas", "must be >= 2");
      break;
    }
  }
}

PotentialPtr make_potential(const PotentialSpec& p) {
  if (p.dimension == 0) config_error("potential.dimension", "must be >= 1");
  if (p.kind == "quadratic") {
    return std::make_shared<QuadraticPotential>(
        p.sigma, broadcast(p.center, p.dimension, "potential.center"));
  }
  if (p.kind == "elastic_net") {
    return std::make_shared<ElasticNetPotential>(p.l1_weight, p.quad_weight,
                                                 p.dimension);
  }
  if (p.kind == "l1") {
    return std::make_shared<L1Potential>(p.l1_weight, p.dimension);
  }
  config_error("potential.kind",
               "expected quadratic | elastic_net | l1, got '" + p.kind + "'");
}

Vector broadcast(const std::vector<double>& values, std::size_t n,
                 const char* what) {
  if (values.size() == 1) {
    return Vector::Constant(static_cast<Eigen::Index>(n), values[0]);
  }
  if (values.size() != n) {
    config_error(what, "expected 1 or " + std::to_string(n) + " values, got " +
                           std::to_string(values.size()));
  }
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(n));
}

}  // namespace ipula
