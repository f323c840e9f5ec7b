#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "ipula/common.hpp"
#include "ipula/envelope.hpp"
#include "ipula/potentials.hpp"
#include "ipula/rng.hpp"

namespace ipula {

enum class SamplerKind { Ipula, ExactUla, Myula, GradSub, ProxSub };

std::string_view to_string(SamplerKind kind);
SamplerKind parse_sampler_kind(std::string_view name);

struct SamplerConfig {
  double gamma = 1.0;
  double eta = 0.1;
  std::size_t steps = 1000;
  std::uint64_t seed = 0;
  ToleranceSchedule schedule = schedule::Fixed{1e-6};
  InnerSolverConfig inner{};
  std::size_t record_every = 1;
  double burn_in_fraction = 0.2;
  // Tolerance of the g-prox solves in MYULA / Prox-sub, as a multiple of
  // sqrt(eta).
  double gprox_tolerance_factor = 1e-3;
  // Keep the state vector in every trace record.
  bool store_states = false;
  // Compute U_gamma upper bounds for samplers that do not produce a
  // certificate of U as part of their step.
  bool track_envelope = true;
  // Test hook: multiply every Gaussian increment by zero. Draws are still
  // consumed so noise accounting is unchanged.
  bool zero_noise = false;

  // Checks eta in (0, gamma); with `gap_bound`, also eta < gamma / 2.
  void validate(bool gap_bound = false) const;
  double noise_scale() const;
};

// Inner-solve bookkeeping reported for one outer step.
struct StepInfo {
  double residual = 0.0;
  double tolerance = 0.0;
  std::size_t inner_iterations = 0;
  bool converged = true;
};

// Certificate of prox_{gamma U}(x) at the tolerance prescribed by the
// schedule at step k. For the relative schedule a missing previous
// gradient norm triggers a pilot solve at tolerance c.
struct ScheduledCertificate {
  ProxCertificate certificate;
  double tolerance = 0.0;
  double gradient_norm = 0.0;
};

ScheduledCertificate certify(const CompositePotential& potential,
                             const Vector& state, const SamplerConfig& config,
                             std::size_t k,
                             const std::optional<Vector>& warm_start,
                             std::optional<double> previous_gradient_norm);

struct IpulaStepResult {
  Vector next_state;
  ScheduledCertificate scheduled;
};

// x_{k+1} = x_k - eta (x_k - y_k)/gamma + sqrt(2 eta) Z_k, with y_k the
// certified approximate prox point; algebraically the same map as
// (1 - eta/gamma) x_k + (eta/gamma) y_k + sqrt(2 eta) Z_k.
IpulaStepResult ipula_step(const Vector& state,
                           const CompositePotential& potential,
                           const SamplerConfig& config, std::size_t k,
                           const std::optional<Vector>& warm_start,
                           const Vector& noise,
                           std::optional<double> previous_gradient_norm = {});
IpulaStepResult ipula_step(const Vector& state,
                           const CompositePotential& potential,
                           const SamplerConfig& config, std::size_t k,
                           const std::optional<Vector>& warm_start,
                           GaussianStream& rng,
                           std::optional<double> previous_gradient_norm = {});

// Reference chain with the closed-form envelope gradient.
Vector exact_moreau_ula_step(const Vector& state,
                             const CompositePotential& potential,
                             const SamplerConfig& config, const Vector& noise);
Vector exact_moreau_ula_step(const Vector& state,
                             const CompositePotential& potential,
                             const SamplerConfig& config, GaussianStream& rng);

struct BaselineStepResult {
  Vector next_state;
  StepInfo info;
  // Point returned by the g-prox (warm start for the next step), if any.
  std::optional<Vector> gprox_point;
};

// x - eta grad f(x) - (eta/gamma)(x - prox_g^gamma(x)) + sqrt(2 eta) Z.
BaselineStepResult myula_step(const Vector& state,
                              const CompositePotential& potential,
                              const SamplerConfig& config, const Vector& noise,
                              const std::optional<Vector>& warm_start = {});
BaselineStepResult myula_step(const Vector& state,
                              const CompositePotential& potential,
                              const SamplerConfig& config, GaussianStream& rng,
                              const std::optional<Vector>& warm_start = {});

// x - eta u(x) + sqrt(2 eta) Z with u the subgradient selection of U.
Vector gradsub_step(const Vector& state, const CompositePotential& potential,
                    const SamplerConfig& config, const Vector& noise);
Vector gradsub_step(const Vector& state, const CompositePotential& potential,
                    const SamplerConfig& config, GaussianStream& rng);

// prox_g^eta(x - eta grad f(x)) + sqrt(2 eta) Z.
BaselineStepResult proxsub_step(const Vector& state,
                                const CompositePotential& potential,
                                const SamplerConfig& config,
                                const Vector& noise,
                                const std::optional<Vector>& warm_start = {});
BaselineStepResult proxsub_step(const Vector& state,
                                const CompositePotential& potential,
                                const SamplerConfig& config,
                                GaussianStream& rng,
                                const std::optional<Vector>& warm_start = {});

// One sampler bound to a potential, carrying chain-local state (warm
// starts, previous gradient norm) between steps.
class LangevinKernel {
 public:
  virtual ~LangevinKernel() = default;
  // Advances x_k to x_{k+1} using the supplied standard Gaussian vector.
  virtual Vector advance(const Vector& state, std::size_t k,
                         const Vector& noise, StepInfo& info) = 0;
  // Inner-solve bookkeeping at `state` without moving the chain.
  virtual StepInfo inspect(const Vector& state, std::size_t k) = 0;
  // Best available upper bound on U_gamma(state); NaN when untracked.
  virtual double envelope_upper(const Vector& state, std::size_t k) = 0;
};

std::unique_ptr<LangevinKernel> make_kernel(SamplerKind kind,
                                            PotentialPtr potential,
                                            const SamplerConfig& config);

struct ChainRecord {
  std::size_t k = 0;
  std::optional<Vector> state;
  double potential_value = 0.0;
  double envelope_upper = 0.0;
  double residual = 0.0;
  double tolerance_used = 0.0;
  std::size_t inner_iterations = 0;
  bool converged = true;
};

struct ChainTrace {
  std::vector<ChainRecord> iterations;
  Vector final_state;
  std::uint64_t rng_draw_count = 0;
};

// Called for every recorded k with the state x_k.
using ChainObserver =
    std::function<void(std::size_t k, const Vector& state,
                       const ChainRecord& record)>;

ChainTrace run_chain(SamplerKind kind, PotentialPtr potential,
                     const SamplerConfig& config, const Vector& initial_state,
                     const ChainObserver& observer = {});

// Synchronous coupling of the exact chain with a perturbed one.
namespace coupling {
// Genuine inner-solver error: the perturbed chain is iPULA.
struct InexactInner {
  ToleranceSchedule schedule;
};
// Exact gradient plus e_k with ||e_k|| = delta, direction uniform on the
// sphere from the error-injection stream.
struct InjectedFixed {
  double delta;
};
// As InjectedFixed with ||e_k|| = tau_k from a schedule.
struct InjectedSchedule {
  ToleranceSchedule schedule;
};
}  // namespace coupling

using ErrorMode = std::variant<coupling::InexactInner, coupling::InjectedFixed,
                               coupling::InjectedSchedule>;

struct CoupledTrace {
  // ||x_k - xbar_k|| for k = 0..steps.
  std::vector<double> distances;
  // Certified bound on the oracle error at step k (k = 0..steps-1): the
  // injected norm, or the certificate residual for InexactInner.
  std::vector<double> error_caps;
  // Tolerance requested at step k (InexactInner), else equal to error_caps.
  std::vector<double> tolerances;
  std::uint64_t shared_seed = 0;
  std::uint64_t shared_draw_count = 0;
};

CoupledTrace run_coupled(PotentialPtr potential, const SamplerConfig& config,
                         const Vector& initial_state, const ErrorMode& mode);

}  // namespace ipula
