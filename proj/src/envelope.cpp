#include "ipula/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ipula {

EnvelopeParams::EnvelopeParams(double gamma, std::size_t dimension)
    : gamma_(gamma), lipschitz_(1.0 / gamma), dimension_(dimension) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw Error(ErrorCode::InvalidArgument, "gamma must be positive");
  }
  if (dimension == 0) {
    throw Error(ErrorCode::InvalidArgument, "dimension must be positive");
  }
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidArgument,
                std::string("tolerance schedule: ") + what +
                    " must be strictly positive");
  }
}

double inner_step(StepRule rule, double modulus, std::size_t t) {
  const double tt = static_cast<double>(t);
  switch (rule) {
    case StepRule::StronglyConvexDecay:
      return 2.0 / (modulus * (tt + 2.0));
    case StepRule::ConstantOverSqrtK:
      return 1.0 / (modulus * std::sqrt(tt + 1.0));
  }
  return 0.0;
}

}  // namespace

void validate_schedule(const ToleranceSchedule& s) {
  std::visit(overloaded{
                 [](const schedule::Fixed& f) { require_positive(f.eps, "eps"); },
                 [](const schedule::StepMatched& m) {
                   require_positive(m.c, "c");
                   require_positive(m.eta, "eta");
                 },
                 [](const schedule::Decaying& d) {
                   require_positive(d.c, "c");
                   require_positive(d.alpha, "alpha");
                 },
                 [](const schedule::Relative& r) { require_positive(r.c, "c"); },
             },
             s);
}

bool needs_gradient_norm(const ToleranceSchedule& s) {
  return std::holds_alternative<schedule::Relative>(s);
}

double evaluate_schedule(const ToleranceSchedule& s, std::size_t k,
                         std::optional<double> current_gradient_norm) {
  validate_schedule(s);
  return std::visit(
      overloaded{
          [](const schedule::Fixed& f) { return f.eps; },
          [](const schedule::StepMatched& m) { return m.c * std::sqrt(m.eta); },
          [k](const schedule::Decaying& d) {
            return d.c * std::pow(static_cast<double>(k) + 1.0, -d.alpha);
          },
          [&](const schedule::Relative& r) {
            if (!current_gradient_norm) {
              throw Error(ErrorCode::MissingGradientNorm,
                          "relative tolerance needs the current inexact "
                          "gradient norm");
            }
            const double g = *current_gradient_norm;
            if (!(g >= 0.0)) {
              throw Error(ErrorCode::InvalidArgument,
                          "gradient norm must be non-negative");
            }
            // A zero gradient norm would make the tolerance vanish; keep the
            // schedule strictly positive with the smallest normal double.
            return std::max(r.c * std::min(1.0, g),
                            std::numeric_limits<double>::min());
          },
      },
      s);
}

void InnerSolverConfig::validate() const {
  if (max_inner_iterations < 1) {
    throw Error(ErrorCode::InvalidArgument,
                "max_inner_iterations must be at least 1");
  }
}

ResidualEvaluation residual_at(const CompositePotential& potential,
                               const Vector& candidate, const Vector& anchor,
                               double gamma) {
  require_dimension(candidate, potential.dimension(), "residual_at candidate");
  require_dimension(anchor, potential.dimension(), "residual_at anchor");
  Vector u = potential.subgradient_nearest(candidate,
                                          (anchor - candidate) / gamma);
  const double r = (u + (candidate - anchor) / gamma).norm();
  return {r, std::move(u)};
}

namespace {

ProxCertificate finish(ProxCertificate cert, const Vector& anchor,
                       double gamma, double tolerance) {
  const double check =
      (cert.subgradient + (cert.point - anchor) / gamma).norm();
  if (check != cert.residual) {
    throw Error(ErrorCode::NonFiniteIterate,
                "certificate residual does not match its subgradient");
  }
  cert.converged = cert.residual <= tolerance;
  return cert;
}

}  // namespace

ProxCertificate exact_certificate(const CompositePotential& potential,
                                  const Vector& anchor, double gamma) {
  auto prox = potential.exact_prox(anchor, gamma);
  if (!prox) {
    throw Error(ErrorCode::MissingExactProx,
                "potential has no closed-form proximal map");
  }
  ProxCertificate cert;
  // The optimality condition supplies the subgradient -(y - x)/gamma, which
  // lies in dU(y) exactly when y is the true prox.
  cert.subgradient = (anchor - *prox) / gamma;
  cert.point = std::move(*prox);
  cert.residual = 0.0;
  cert.inner_iterations = 0;
  cert.converged = true;
  return cert;
}

ProxCertificate solve_prox_subproblem(const CompositePotential& potential,
                                      const Vector& anchor,
                                      const EnvelopeParams& params,
                                      double tolerance,
                                      const InnerSolverConfig& solver,
                                      const std::optional<Vector>& warm_start) {
  require_dimension(anchor, params.dimension(), "solve_prox_subproblem anchor");
  require_dimension(anchor, potential.dimension(),
                    "solve_prox_subproblem potential");
  if (!(tolerance >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "tolerance must be non-negative");
  }
  solver.validate();
  const double gamma = params.gamma();

  if (solver.use_exact_prox && potential.exact_prox(anchor, gamma)) {
    return finish(exact_certificate(potential, anchor, gamma), anchor, gamma,
                  tolerance);
  }

  const double sigma = solver.strong_convexity_hint >= 0.0
                           ? solver.strong_convexity_hint
                           : potential.strong_convexity();
  const double modulus = sigma + params.lipschitz();

  Vector y = anchor;
  if (warm_start) {
    require_dimension(*warm_start, params.dimension(), "warm start");
    y = *warm_start;
  }

  ProxCertificate best;
  {
    auto eval = residual_at(potential, y, anchor, gamma);
    best.point = y;
    best.residual = eval.residual;
    best.subgradient = std::move(eval.subgradient);
  }

  auto consider = [&](const Vector& candidate, ResidualEvaluation eval) {
    if (eval.residual < best.residual) {
      best.point = candidate;
      best.residual = eval.residual;
      best.subgradient = std::move(eval.subgradient);
    }
  };

  Vector direction = best.subgradient + (y - anchor) / gamma;
  std::size_t t = 0;
  while (t < solver.max_inner_iterations && !(best.residual <= tolerance)) {
    const double step = inner_step(solver.step_rule, modulus, t);
    y -= step * direction;
    ++t;
    if (!y.allFinite()) {
      throw Error(ErrorCode::NonFiniteIterate,
                  "inner prox solve diverged at iteration " +
                      std::to_string(t) +
                      " (step rule / strong convexity mismatch?)");
    }
    auto eval = residual_at(potential, y, anchor, gamma);
    direction = eval.subgradient + (y - anchor) / gamma;
    const double step_extent = step * direction.lpNorm<Eigen::Infinity>();
    consider(y, std::move(eval));

    if (solver.snap_kinks) {
      Vector snapped = y;
      if (potential.snap_to_kinks(snapped, step_extent)) {
        consider(snapped, residual_at(potential, snapped, anchor, gamma));
      }
    }
  }
  best.inner_iterations = t;
  return finish(std::move(best), anchor, gamma, tolerance);
}

Vector inexact_moreau_gradient(const ProxCertificate& certificate,
                               const Vector& anchor, double gamma) {
  require_dimension(certificate.point, static_cast<std::size_t>(anchor.size()),
                    "inexact_moreau_gradient");
  return (anchor - certificate.point) / gamma;
}

double moreau_envelope_value(const CompositePotential& potential,
                             const Vector& anchor,
                             const ProxCertificate& certificate,
                             double gamma) {
  require_dimension(certificate.point, potential.dimension(),
                    "moreau_envelope_value");
  return potential.value(certificate.point) +
         (anchor - certificate.point).squaredNorm() / (2.0 * gamma);
}

}  // namespace ipula
