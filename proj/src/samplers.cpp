#include "ipula/samplers.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace ipula {

std::string_view to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::Ipula: return "ipula";
    case SamplerKind::ExactUla: return "exact_ula";
    case SamplerKind::Myula: return "myula";
    case SamplerKind::GradSub: return "gradsub";
    case SamplerKind::ProxSub: return "proxsub";
  }
  return "unknown";
}

SamplerKind parse_sampler_kind(std::string_view name) {
  for (auto kind : {SamplerKind::Ipula, SamplerKind::ExactUla,
                    SamplerKind::Myula, SamplerKind::GradSub,
                    SamplerKind::ProxSub}) {
    if (name == to_string(kind)) return kind;
  }
  throw Error(ErrorCode::ConfigError,
              "unknown sampler kind '" + std::string(name) +
                  "' (expected ipula, exact_ula, myula, gradsub, proxsub)");
}

void SamplerConfig::validate(bool gap_bound) const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::StepSizeOutOfRange, msg);
  };
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    fail("Moreau parameter gamma must be positive");
  }
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    fail("step size eta must be positive");
  }
  if (!(eta < gamma)) {
    std::ostringstream os;
    os << "step-size condition eta in (0, 1/L_gamma) = (0, gamma) violated: eta="
       << eta << ", gamma=" << gamma;
    fail(os.str());
  }
  if (gap_bound && !(eta < 0.5 * gamma)) {
    std::ostringstream os;
    os << "objective-gap bound requires eta in (0, 1/(2 L_gamma)) = (0, "
       << 0.5 * gamma << "), got eta=" << eta;
    fail(os.str());
  }
  if (record_every == 0) {
    throw Error(ErrorCode::InvalidArgument, "record_every must be >= 1");
  }
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "burn_in_fraction must lie in [0, 1)");
  }
  if (!(gprox_tolerance_factor > 0.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "gprox_tolerance_factor must be positive");
  }
  validate_schedule(schedule);
  inner.validate();
}

double SamplerConfig::noise_scale() const {
  return zero_noise ? 0.0 : std::sqrt(2.0 * eta);
}

namespace {

Vector langevin_update(const Vector& x, const Vector& drift,
                       const SamplerConfig& config, const Vector& noise) {
  require_dimension(noise, static_cast<std::size_t>(x.size()), "noise");
  return x - config.eta * drift + config.noise_scale() * noise;
}

Vector draw_noise(GaussianStream& rng, std::size_t n) {
  return rng.draw_vector(n);
}

Vector smooth_gradient(const CompositePotential& potential, const Vector& x) {
  auto g = potential.smooth_part_gradient(x);
  if (!g) {
    throw Error(ErrorCode::MissingSmoothPart,
                "sampler needs a potential with a declared smooth part");
  }
  return std::move(*g);
}

struct GProx {
  Vector point;
  StepInfo info;
};

// prox of the nonsmooth part g with parameter `param`.
GProx prox_of_g(const CompositePotential& potential, const Vector& v,
                double param, const SamplerConfig& config,
                const std::optional<Vector>& warm_start) {
  const auto g = potential.nonsmooth_part();
  if (!g) return {v, StepInfo{}};
  if (auto exact = g->exact_prox(v, param)) {
    return {std::move(*exact), StepInfo{}};
  }
  const double tol = config.gprox_tolerance_factor * std::sqrt(config.eta);
  EnvelopeParams params(param, g->dimension());
  ProxCertificate cert =
      solve_prox_subproblem(*g, v, params, tol, config.inner, warm_start);
  StepInfo info;
  info.residual = cert.residual;
  info.tolerance = tol;
  info.inner_iterations = cert.inner_iterations;
  info.converged = cert.converged;
  return {std::move(cert.point), info};
}

Vector exact_envelope_gradient(const CompositePotential& potential,
                               const Vector& x, double gamma) {
  ProxCertificate cert = exact_certificate(potential, x, gamma);
  return inexact_moreau_gradient(cert, x, gamma);
}

}  // namespace

ScheduledCertificate certify(const CompositePotential& potential,
                             const Vector& state, const SamplerConfig& config,
                             std::size_t k,
                             const std::optional<Vector>& warm_start,
                             std::optional<double> previous_gradient_norm) {
  EnvelopeParams params(config.gamma, potential.dimension());
  std::optional<Vector> warm = warm_start;
  std::optional<double> norm = previous_gradient_norm;
  if (needs_gradient_norm(config.schedule) && !norm) {
    // Pilot solve at the loosest relative level, c * 1.
    const double pilot_tol = evaluate_schedule(config.schedule, k, 1.0);
    ProxCertificate pilot = solve_prox_subproblem(potential, state, params,
                                                  pilot_tol, config.inner, warm);
    norm = inexact_moreau_gradient(pilot, state, config.gamma).norm();
    warm = std::move(pilot.point);
  }
  ScheduledCertificate out;
  out.tolerance = evaluate_schedule(config.schedule, k, norm);
  out.certificate = solve_prox_subproblem(potential, state, params,
                                          out.tolerance, config.inner, warm);
  out.gradient_norm =
      inexact_moreau_gradient(out.certificate, state, config.gamma).norm();
  return out;
}

IpulaStepResult ipula_step(const Vector& state,
                           const CompositePotential& potential,
                           const SamplerConfig& config, std::size_t k,
                           const std::optional<Vector>& warm_start,
                           const Vector& noise,
                           std::optional<double> previous_gradient_norm) {
  require_dimension(state, potential.dimension(), "ipula_step state");
  IpulaStepResult out;
  out.scheduled = certify(potential, state, config, k, warm_start,
                          previous_gradient_norm);
  const Vector drift =
      inexact_moreau_gradient(out.scheduled.certificate, state, config.gamma);
  out.next_state = langevin_update(state, drift, config, noise);
  return out;
}

IpulaStepResult ipula_step(const Vector& state,
                           const CompositePotential& potential,
                           const SamplerConfig& config, std::size_t k,
                           const std::optional<Vector>& warm_start,
                           GaussianStream& rng,
                           std::optional<double> previous_gradient_norm) {
  const Vector z = draw_noise(rng, potential.dimension());
  return ipula_step(state, potential, config, k, warm_start, z,
                    previous_gradient_norm);
}

Vector exact_moreau_ula_step(const Vector& state,
                             const CompositePotential& potential,
                             const SamplerConfig& config, const Vector& noise) {
  require_dimension(state, potential.dimension(), "exact_moreau_ula_step");
  const Vector drift = exact_envelope_gradient(potential, state, config.gamma);
  return langevin_update(state, drift, config, noise);
}

Vector exact_moreau_ula_step(const Vector& state,
                             const CompositePotential& potential,
                             const SamplerConfig& config, GaussianStream& rng) {
  const Vector z = draw_noise(rng, potential.dimension());
  return exact_moreau_ula_step(state, potential, config, z);
}

BaselineStepResult myula_step(const Vector& state,
                              const CompositePotential& potential,
                              const SamplerConfig& config, const Vector& noise,
                              const std::optional<Vector>& warm_start) {
  require_dimension(state, potential.dimension(), "myula_step");
  const Vector grad_f = smooth_gradient(potential, state);
  GProx gp = prox_of_g(potential, state, config.gamma, config, warm_start);
  const Vector drift = grad_f + (state - gp.point) / config.gamma;
  BaselineStepResult out;
  out.next_state = langevin_update(state, drift, config, noise);
  out.info = gp.info;
  out.gprox_point = std::move(gp.point);
  return out;
}

BaselineStepResult myula_step(const Vector& state,
                              const CompositePotential& potential,
                              const SamplerConfig& config, GaussianStream& rng,
                              const std::optional<Vector>& warm_start) {
  const Vector z = draw_noise(rng, potential.dimension());
  return myula_step(state, potential, config, z, warm_start);
}

Vector gradsub_step(const Vector& state, const CompositePotential& potential,
                    const SamplerConfig& config, const Vector& noise) {
  require_dimension(state, potential.dimension(), "gradsub_step");
  return langevin_update(state, potential.subgradient_select(state), config,
                         noise);
}

Vector gradsub_step(const Vector& state, const CompositePotential& potential,
                    const SamplerConfig& config, GaussianStream& rng) {
  const Vector z = draw_noise(rng, potential.dimension());
  return gradsub_step(state, potential, config, z);
}

BaselineStepResult proxsub_step(const Vector& state,
                                const CompositePotential& potential,
                                const SamplerConfig& config,
                                const Vector& noise,
                                const std::optional<Vector>& warm_start) {
  require_dimension(state, potential.dimension(), "proxsub_step");
  require_dimension(noise, potential.dimension(), "noise");
  const Vector forward =
      state - config.eta * smooth_gradient(potential, state);
  GProx gp = prox_of_g(potential, forward, config.eta, config, warm_start);
  BaselineStepResult out;
  out.next_state = gp.point + config.noise_scale() * noise;
  out.info = gp.info;
  out.gprox_point = std::move(gp.point);
  return out;
}

BaselineStepResult proxsub_step(const Vector& state,
                                const CompositePotential& potential,
                                const SamplerConfig& config,
                                GaussianStream& rng,
                                const std::optional<Vector>& warm_start) {
  const Vector z = draw_noise(rng, potential.dimension());
  return proxsub_step(state, potential, config, z, warm_start);
}

// --- kernels ---------------------------------------------------------------

namespace {

constexpr double kUntracked = std::numeric_limits<double>::quiet_NaN();

class KernelBase : public LangevinKernel {
 public:
  KernelBase(PotentialPtr potential, const SamplerConfig& config)
      : potential_(std::move(potential)), config_(config) {}

  double envelope_upper(const Vector& state, std::size_t k) override {
    if (!config_.track_envelope) return kUntracked;
    auto sc = certify(*potential_, state, config_, k, envelope_warm_,
                      envelope_norm_);
    envelope_warm_ = sc.certificate.point;
    envelope_norm_ = sc.gradient_norm;
    return moreau_envelope_value(*potential_, state, sc.certificate,
                                 config_.gamma);
  }

 protected:
  PotentialPtr potential_;
  SamplerConfig config_;

 private:
  std::optional<Vector> envelope_warm_;
  std::optional<double> envelope_norm_;
};

class IpulaKernel final : public KernelBase {
 public:
  using KernelBase::KernelBase;

  Vector advance(const Vector& state, std::size_t k, const Vector& noise,
                 StepInfo& info) override {
    IpulaStepResult r =
        ipula_step(state, *potential_, config_, k, warm_, noise, norm_);
    remember(state, r.scheduled, info);
    return std::move(r.next_state);
  }

  StepInfo inspect(const Vector& state, std::size_t k) override {
    StepInfo info;
    auto sc = certify(*potential_, state, config_, k, warm_, norm_);
    remember(state, sc, info);
    return info;
  }

  double envelope_upper(const Vector& state, std::size_t /*k*/) override {
    if (last_state_ && *last_state_ == state) return last_envelope_;
    return kUntracked;
  }

 private:
  void remember(const Vector& state, const ScheduledCertificate& sc,
                StepInfo& info) {
    info.residual = sc.certificate.residual;
    info.tolerance = sc.tolerance;
    info.inner_iterations = sc.certificate.inner_iterations;
    info.converged = sc.certificate.converged;
    warm_ = sc.certificate.point;
    norm_ = sc.gradient_norm;
    last_state_ = state;
    last_envelope_ = moreau_envelope_value(*potential_, state, sc.certificate,
                                           config_.gamma);
  }

  std::optional<Vector> warm_;
  std::optional<double> norm_;
  std::optional<Vector> last_state_;
  double last_envelope_ = kUntracked;
};

class ExactUlaKernel final : public KernelBase {
 public:
  using KernelBase::KernelBase;

  Vector advance(const Vector& state, std::size_t /*k*/, const Vector& noise,
                 StepInfo& info) override {
    info = StepInfo{};
    return exact_moreau_ula_step(state, *potential_, config_, noise);
  }

  StepInfo inspect(const Vector& /*state*/, std::size_t /*k*/) override {
    return StepInfo{};
  }

  double envelope_upper(const Vector& state, std::size_t /*k*/) override {
    ProxCertificate cert = exact_certificate(*potential_, state, config_.gamma);
    return moreau_envelope_value(*potential_, state, cert, config_.gamma);
  }
};

class MyulaKernel final : public KernelBase {
 public:
  using KernelBase::KernelBase;

  Vector advance(const Vector& state, std::size_t /*k*/, const Vector& noise,
                 StepInfo& info) override {
    BaselineStepResult r =
        myula_step(state, *potential_, config_, noise, warm_);
    info = r.info;
    warm_ = std::move(r.gprox_point);
    return std::move(r.next_state);
  }

  StepInfo inspect(const Vector& state, std::size_t /*k*/) override {
    return prox_of_g(*potential_, state, config_.gamma, config_, warm_).info;
  }

 private:
  std::optional<Vector> warm_;
};

class ProxSubKernel final : public KernelBase {
 public:
  using KernelBase::KernelBase;

  Vector advance(const Vector& state, std::size_t /*k*/, const Vector& noise,
                 StepInfo& info) override {
    BaselineStepResult r =
        proxsub_step(state, *potential_, config_, noise, warm_);
    info = r.info;
    warm_ = std::move(r.gprox_point);
    return std::move(r.next_state);
  }

  StepInfo inspect(const Vector& state, std::size_t /*k*/) override {
    const Vector forward =
        state - config_.eta * smooth_gradient(*potential_, state);
    return prox_of_g(*potential_, forward, config_.eta, config_, warm_).info;
  }

 private:
  std::optional<Vector> warm_;
};

class GradSubKernel final : public KernelBase {
 public:
  using KernelBase::KernelBase;

  Vector advance(const Vector& state, std::size_t /*k*/, const Vector& noise,
                 StepInfo& info) override {
    info = StepInfo{};
    return gradsub_step(state, *potential_, config_, noise);
  }

  StepInfo inspect(const Vector& /*state*/, std::size_t /*k*/) override {
    return StepInfo{};
  }
};

}  // namespace

std::unique_ptr<LangevinKernel> make_kernel(SamplerKind kind,
                                            PotentialPtr potential,
                                            const SamplerConfig& config) {
  if (!potential) {
    throw Error(ErrorCode::InvalidArgument, "sampler needs a potential");
  }
  switch (kind) {
    case SamplerKind::Ipula:
      return std::make_unique<IpulaKernel>(std::move(potential), config);
    case SamplerKind::ExactUla:
      return std::make_unique<ExactUlaKernel>(std::move(potential), config);
    case SamplerKind::Myula:
      return std::make_unique<MyulaKernel>(std::move(potential), config);
    case SamplerKind::GradSub:
      return std::make_unique<GradSubKernel>(std::move(potential), config);
    case SamplerKind::ProxSub:
      return std::make_unique<ProxSubKernel>(std::move(potential), config);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown sampler kind");
}

ChainTrace run_chain(SamplerKind kind, PotentialPtr potential,
                     const SamplerConfig& config, const Vector& initial_state,
                     const ChainObserver& observer) {
  config.validate();
  if (!potential) {
    throw Error(ErrorCode::InvalidArgument, "run_chain needs a potential");
  }
  const std::size_t n = potential->dimension();
  require_dimension(initial_state, n, "run_chain initial state");
  if (kind == SamplerKind::ExactUla &&
      !potential->exact_prox(initial_state, config.gamma)) {
    throw Error(ErrorCode::MissingExactProx,
                "exact_ula needs a potential with a closed-form prox");
  }

  auto kernel = make_kernel(kind, potential, config);
  GaussianStream rng(derive_seed(config.seed, Stream::Chain));
  ChainTrace trace;
  trace.iterations.reserve(config.steps / config.record_every + 1);

  Vector x = initial_state;
  Vector z(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k <= config.steps; ++k) {
    const bool record = k % config.record_every == 0;
    const bool last = k == config.steps;
    if (last && !record) break;

    StepInfo info;
    Vector next;
    if (!last) {
      rng.fill(z);
      next = kernel->advance(x, k, z, info);
    } else {
      info = kernel->inspect(x, k);
    }

    if (record) {
      ChainRecord rec;
      rec.k = k;
      if (config.store_states) rec.state = x;
      rec.potential_value = potential->value(x);
      rec.envelope_upper = kernel->envelope_upper(x, k);
      rec.residual = info.residual;
      rec.tolerance_used = info.tolerance;
      rec.inner_iterations = info.inner_iterations;
      rec.converged = info.converged;
      if (observer) observer(k, x, rec);
      trace.iterations.push_back(std::move(rec));
    }
    if (!last) x = std::move(next);
  }
  trace.final_state = std::move(x);
  trace.rng_draw_count = rng.draw_count();
  return trace;
}

// --- coupling --------------------------------------------------------------

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

CoupledTrace run_coupled(PotentialPtr potential, const SamplerConfig& config,
                         const Vector& initial_state, const ErrorMode& mode) {
  config.validate();
  if (!potential) {
    throw Error(ErrorCode::InvalidArgument, "run_coupled needs a potential");
  }
  const std::size_t n = potential->dimension();
  require_dimension(initial_state, n, "run_coupled initial state");
  if (!potential->exact_prox(initial_state, config.gamma)) {
    throw Error(ErrorCode::MissingExactProx,
                "coupled runs need the exact reference chain");
  }
  if (const auto* inj = std::get_if<coupling::InjectedFixed>(&mode)) {
    if (!(inj->delta >= 0.0) || !std::isfinite(inj->delta)) {
      throw Error(ErrorCode::InvalidArgument,
                  "injected delta must be non-negative");
    }
  }
  if (const auto* s = std::get_if<coupling::InjectedSchedule>(&mode)) {
    if (needs_gradient_norm(s->schedule)) {
      throw Error(ErrorCode::InvalidArgument,
                  "injected error caps must be deterministic; relative "
                  "schedules are not allowed");
    }
  }

  CoupledTrace out;
  out.shared_seed = derive_seed(config.seed, Stream::Chain);
  GaussianStream shared(out.shared_seed);
  GaussianStream directions(derive_seed(config.seed, Stream::ErrorInjection));

  SamplerConfig inexact_config = config;
  if (const auto* ii = std::get_if<coupling::InexactInner>(&mode)) {
    inexact_config.schedule = ii->schedule;
    validate_schedule(ii->schedule);
  }

  Vector exact = initial_state;
  Vector perturbed = initial_state;
  std::optional<Vector> warm;
  std::optional<double> norm;
  out.distances.reserve(config.steps + 1);
  out.distances.push_back(0.0);
  Vector z(static_cast<Eigen::Index>(n));

  // Injected modes advance the difference d = perturbed - exact directly:
  // the shared noise cancels exactly instead of up to round-off, and
  // d_{k+1} = d_k - eta (grad U_gamma(x + d_k) - grad U_gamma(x) + e_k)
  // with the gradient difference written through the prox difference.
  Vector diff = Vector::Zero(static_cast<Eigen::Index>(n));
  auto inject = [&](double norm_cap) {
    const Vector e = norm_cap * directions.draw_unit_vector(n);
    const Vector shifted = exact + diff;
    const Vector prox_shift = *potential->exact_prox(shifted, config.gamma);
    const Vector prox_base = *potential->exact_prox(exact, config.gamma);
    const Vector grad_diff = (diff - (prox_shift - prox_base)) / config.gamma;
    diff -= config.eta * (grad_diff + e);
    out.error_caps.push_back(norm_cap);
    out.tolerances.push_back(norm_cap);
  };
  const bool tracks_difference =
      !std::holds_alternative<coupling::InexactInner>(mode);

  for (std::size_t k = 0; k < config.steps; ++k) {
    shared.fill(z);
    Vector exact_next = exact_moreau_ula_step(exact, *potential, config, z);

    std::visit(
        overloaded{
            [&](const coupling::InexactInner&) {
              IpulaStepResult r = ipula_step(perturbed, *potential,
                                             inexact_config, k, warm, z, norm);
              out.error_caps.push_back(r.scheduled.certificate.residual);
              out.tolerances.push_back(r.scheduled.tolerance);
              warm = std::move(r.scheduled.certificate.point);
              norm = r.scheduled.gradient_norm;
              perturbed = std::move(r.next_state);
            },
            [&](const coupling::InjectedFixed& f) {
              inject(f.delta);
            },
            [&](const coupling::InjectedSchedule& s) {
              inject(evaluate_schedule(s.schedule, k));
            },
        },
        mode);

    exact = std::move(exact_next);
    out.distances.push_back(tracks_difference ? diff.norm()
                                              : (perturbed - exact).norm());
  }
  out.shared_draw_count = shared.draw_count();
  return out;
}

}  // namespace ipula
