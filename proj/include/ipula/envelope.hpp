#pragma once

#include <cstddef>
#include <optional>
#include <variant>

#include "ipula/common.hpp"
#include "ipula/potentials.hpp"

namespace ipula {

// Moreau smoothing parameter and the derived gradient Lipschitz constant
// 1/gamma, stored once at construction.
class EnvelopeParams {
 public:
  EnvelopeParams(double gamma, std::size_t dimension);

  double gamma() const noexcept { return gamma_; }
  double lipschitz() const noexcept { return lipschitz_; }
  std::size_t dimension() const noexcept { return dimension_; }

 private:
  double gamma_;
  double lipschitz_;
  std::size_t dimension_;
};

// Approximate proximal point y together with the selected u in dU(y) and
// the residual ||u + (y - anchor)/gamma||. The residual bounds the error of
// the inexact envelope gradient (anchor - y)/gamma.
struct ProxCertificate {
  Vector point;
  double residual = 0.0;
  Vector subgradient;
  std::size_t inner_iterations = 0;
  bool converged = false;
};

namespace schedule {
struct Fixed {
  double eps;
};
// c * sqrt(eta), independent of k.
struct StepMatched {
  double c;
  double eta;
};
// c * (k + 1)^(-alpha).
struct Decaying {
  double c;
  double alpha;
};
// c * min{1, ||inexact gradient||}.
struct Relative {
  double c;
};
}  // namespace schedule

using ToleranceSchedule =
    std::variant<schedule::Fixed, schedule::StepMatched, schedule::Decaying,
                 schedule::Relative>;

void validate_schedule(const ToleranceSchedule& s);
bool needs_gradient_norm(const ToleranceSchedule& s);

double evaluate_schedule(const ToleranceSchedule& s, std::size_t k,
                         std::optional<double> current_gradient_norm = {});

enum class StepRule {
  // 2 / (mu (t + 2)) with mu = sigma + 1/gamma the modulus of the prox
  // objective.
  StronglyConvexDecay,
  // 1 / (mu sqrt(t + 1)).
  ConstantOverSqrtK,
};

struct InnerSolverConfig {
  std::size_t max_inner_iterations = 200;
  StepRule step_rule = StepRule::StronglyConvexDecay;
  // sigma of U when known (0 if unknown). Negative means "ask the
  // potential".
  double strong_convexity_hint = -1.0;
  // Return the closed-form prox (residual 0) when the potential has one.
  bool use_exact_prox = false;
  // Also evaluate kink-snapped candidates (see
  // CompositePotential::snap_to_kinks).
  bool snap_kinks = true;

  void validate() const;
};

// Residual of `candidate` as an approximate prox_{gamma U}(anchor). The
// subgradient is the potential's element of dU(candidate) nearest to
// (anchor - candidate)/gamma, which is deterministic.
struct ResidualEvaluation {
  double residual;
  Vector subgradient;
};

ResidualEvaluation residual_at(const CompositePotential& potential,
                               const Vector& candidate, const Vector& anchor,
                               double gamma);

// Subgradient method on U(y) + ||anchor - y||^2 / (2 gamma), tracking the
// iterate with the smallest residual. Stops as soon as the best residual is
// <= tolerance or the iteration budget runs out; an unmet tolerance is
// reported through `converged`, not thrown.
ProxCertificate solve_prox_subproblem(
    const CompositePotential& potential, const Vector& anchor,
    const EnvelopeParams& params, double tolerance,
    const InnerSolverConfig& solver,
    const std::optional<Vector>& warm_start = std::nullopt);

// (anchor - point) / gamma
Vector inexact_moreau_gradient(const ProxCertificate& certificate,
                               const Vector& anchor, double gamma);

// U(point) + ||anchor - point||^2 / (2 gamma). Upper bound on the envelope
// at anchor; equal to it only for an exact certificate.
double moreau_envelope_value(const CompositePotential& potential,
                             const Vector& anchor,
                             const ProxCertificate& certificate, double gamma);

// Certificate built from the closed-form prox; throws MissingExactProx when
// the potential has none.
ProxCertificate exact_certificate(const CompositePotential& potential,
                                  const Vector& anchor, double gamma);

}  // namespace ipula
