#include "doctest.h"

#include <cmath>
#include <random>

#include "ipula/envelope.hpp"
#include "ipula/potentials.hpp"
#include "oracles.hpp"

using namespace ipula;

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

InnerSolverConfig plain_inner(std::size_t iters = 2000) {
  InnerSolverConfig c;
  c.max_inner_iterations = iters;
  return c;
}

}  // namespace

TEST_CASE("envelope params store 1/gamma") {
  EnvelopeParams p(0.25, 3);
  CHECK(p.lipschitz() == 4.0);
  CHECK(p.dimension() == 3);
  CHECK_THROWS_AS(EnvelopeParams(0.0, 1), Error);
  CHECK_THROWS_AS(EnvelopeParams(-1.0, 1), Error);
}

TEST_CASE("exact prox short-circuit on a shifted quadratic") {
  QuadraticPotential q(1.0, scalar(3.0));
  InnerSolverConfig inner;
  inner.use_exact_prox = true;
  auto cert = solve_prox_subproblem(q, scalar(0.0), EnvelopeParams(1.0, 1), 0.0,
                                    inner);
  CHECK(cert.point[0] == doctest::Approx(1.5));
  CHECK(cert.residual == 0.0);
  CHECK(cert.converged);
}

TEST_CASE("inner solver on the elastic net reaches the closed-form prox") {
  ElasticNetPotential en(1.0, 1.0, 1);
  auto cert = solve_prox_subproblem(en, scalar(3.0), EnvelopeParams(1.0, 1),
                                    1e-8, plain_inner());
  CHECK(cert.converged);
  CHECK(cert.residual <= 1e-8);
  CHECK(std::abs(cert.point[0] - 1.0) <= 1.0 * cert.residual + 1e-15);

  // Dead-zone anchor: the prox is exactly zero.
  auto dead = solve_prox_subproblem(en, scalar(0.5), EnvelopeParams(1.0, 1),
                                    1e-10, plain_inner());
  CHECK(dead.converged);
  CHECK(dead.point[0] == 0.0);
}

TEST_CASE("prox fixes the minimizer") {
  QuadraticPotential q(2.0, scalar(-0.7));
  auto cert = solve_prox_subproblem(q, scalar(-0.7), EnvelopeParams(0.3, 1),
                                    1e-12, plain_inner(), scalar(-0.7));
  CHECK(cert.residual <= 1e-12);
  CHECK(cert.point[0] == doctest::Approx(-0.7).epsilon(1e-12));
}

TEST_CASE("residual_at examples") {
  QuadraticPotential q(1.0, Vector::Zero(1));
  auto r = residual_at(q, scalar(1.2), scalar(2.0), 1.0);
  CHECK(r.subgradient[0] == doctest::Approx(1.2));
  CHECK(r.residual == doctest::Approx(0.4));

  ElasticNetPotential en(1.0, 1.0, 1);
  auto e = residual_at(en, scalar(0.9), scalar(3.0), 1.0);
  CHECK(e.subgradient[0] == doctest::Approx(1.9));
  CHECK(e.residual == doctest::Approx(0.2));

  auto exact = residual_at(en, *en.exact_prox(scalar(3.0), 1.0), scalar(3.0), 1.0);
  CHECK(exact.residual == 0.0);

  // Dead zone: the subgradient at 0 is picked from [-1, 1] to match.
  auto dead = residual_at(en, scalar(0.0), scalar(0.5), 1.0);
  CHECK(dead.residual == 0.0);
  CHECK(dead.subgradient[0] == doctest::Approx(0.5));
  CHECK(en.subgradient_select(scalar(0.0))[0] == 0.0);
}

TEST_CASE("inexact gradient examples") {
  ProxCertificate c;
  c.point = scalar(1.0);
  CHECK(inexact_moreau_gradient(c, scalar(2.0), 1.0)[0] == doctest::Approx(1.0));
  CHECK(inexact_moreau_gradient(c, scalar(1.0), 1.0)[0] == 0.0);

  ProxCertificate c2;
  Vector p(2), a(2);
  p << 1.0, 0.0;
  a << 2.0, 0.0;
  c2.point = p;
  const Vector g = inexact_moreau_gradient(c2, a, 0.5);
  CHECK(g[0] == doctest::Approx(2.0));
  CHECK(g[1] == 0.0);
}

TEST_CASE("envelope value examples and sandwich") {
  QuadraticPotential q(1.0, Vector::Zero(1));
  auto exact = exact_certificate(q, scalar(2.0), 1.0);
  CHECK(exact.point[0] == doctest::Approx(1.0));
  CHECK(moreau_envelope_value(q, scalar(2.0), exact, 1.0) == doctest::Approx(1.0));

  QuadraticPotential shifted(3.0, scalar(0.4));
  auto at_min = exact_certificate(shifted, scalar(0.4), 0.7);
  CHECK(moreau_envelope_value(shifted, scalar(0.4), at_min, 0.7) == doctest::Approx(0.0));

  // Any certificate: exact envelope <= value <= U(anchor).
  std::mt19937_64 rng(31);
  ElasticNetPotential en(0.6, 0.8, 8);
  std::uniform_int_distribution<int> iters(1, 40);
  for (int t = 0; t < 200; ++t) {
    const Vector x = oracle::random_vector(rng, 8, 2.0);
    const double gamma = 0.5;
    auto cert = solve_prox_subproblem(en, x, EnvelopeParams(gamma, 8), 0.0,
                                      plain_inner(static_cast<std::size_t>(iters(rng))));
    const double v = moreau_envelope_value(en, x, cert, gamma);
    const double ex = moreau_envelope_value(en, x, exact_certificate(en, x, gamma), gamma);
    CHECK(v >= ex - 1e-12);
    CHECK(v <= en.value(x) + 1e-12);
  }
}

TEST_CASE("Moreau identities on the quadratic match closed forms") {
  std::mt19937_64 rng(41);
  for (double gamma : {0.1, 1.0, 10.0}) {
    const double sigma = 1.3;
    const Vector mu = oracle::random_vector(rng, 5);
    QuadraticPotential q(sigma, mu);
    for (int t = 0; t < 100; ++t) {
      const Vector x = oracle::random_vector(rng, 5, 3.0);
      auto cert = exact_certificate(q, x, gamma);
      const double env = moreau_envelope_value(q, x, cert, gamma);
      const double env_ref = sigma / (2.0 * (1.0 + gamma * sigma)) * (x - mu).squaredNorm();
      CHECK(std::abs(env - env_ref) <= 1e-10 * (1.0 + env_ref));
      const Vector g = inexact_moreau_gradient(cert, x, gamma);
      const Vector g_ref = sigma / (1.0 + gamma * sigma) * (x - mu);
      CHECK((g - g_ref).norm() <= 1e-10 * (1.0 + g_ref.norm()));
    }
  }
}

TEST_CASE("envelope gradient matches finite differences of a brute-force envelope") {
  std::mt19937_64 rng(43);
  const double lam = 0.9, s = 0.6, gamma = 0.8;
  ElasticNetPotential en(lam, s, 4);
  auto phi = [&](double t) { return lam * std::abs(t) + 0.5 * s * t * t; };
  auto env = [&](const Vector& x) {
    const Vector y = oracle::separable_prox(phi, x, gamma, 20.0);
    return oracle::separable_value(phi, y) + (x - y).squaredNorm() / (2.0 * gamma);
  };
  for (int t = 0; t < 10; ++t) {
    const Vector x = oracle::random_vector(rng, 4, 2.0);
    const Vector fd = oracle::fd_gradient(env, x, 1e-4);
    const Vector g = inexact_moreau_gradient(exact_certificate(en, x, gamma), x, gamma);
    CHECK((fd - g).norm() < 1e-5);
  }
}

TEST_CASE("inexact gradient error never exceeds the residual") {
  std::mt19937_64 rng(47);
  ElasticNetPotential en(0.5, 0.7, 20);
  std::uniform_int_distribution<int> iters(1, 60);
  std::uniform_real_distribution<double> gam(0.05, 5.0);
  int violations = 0;
  for (int t = 0; t < 500; ++t) {
    const double gamma = gam(rng);
    const Vector x = oracle::random_vector(rng, 20, 2.0);
    InnerSolverConfig inner = plain_inner(static_cast<std::size_t>(iters(rng)));
    inner.step_rule = (t % 2) ? StepRule::ConstantOverSqrtK : StepRule::StronglyConvexDecay;
    inner.snap_kinks = (t % 3) != 0;
    auto cert = solve_prox_subproblem(en, x, EnvelopeParams(gamma, 20), 0.0, inner);
    const Vector g = inexact_moreau_gradient(cert, x, gamma);
    const Vector g_true = inexact_moreau_gradient(exact_certificate(en, x, gamma), x, gamma);
    // Slack covers rounding in the two gradient evaluations, ~eps |x| / gamma.
    const double slack = 64.0 * 2.2e-16 * (1.0 + x.norm()) / gamma;
    if ((g - g_true).norm() > cert.residual + slack) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("envelope regularity: Lipschitz gradient and strong convexity transfer") {
  std::mt19937_64 rng(53);
  const double sigma = 0.4;
  for (double gamma : {0.2, 2.0}) {
    ElasticNetPotential en(0.8, sigma, 6);
    const double m = sigma / (1.0 + gamma * sigma);
    for (int t = 0; t < 300; ++t) {
      const Vector x = oracle::random_vector(rng, 6, 3.0);
      const Vector y = oracle::random_vector(rng, 6, 3.0);
      const Vector gx = inexact_moreau_gradient(exact_certificate(en, x, gamma), x, gamma);
      const Vector gy = inexact_moreau_gradient(exact_certificate(en, y, gamma), y, gamma);
      CHECK((gx - gy).norm() <= (x - y).norm() / gamma * (1.0 + 1e-12));
      CHECK((gx - gy).dot(x - y) >= m * (x - y).squaredNorm() * (1.0 - 1e-12) - 1e-12);
    }
  }
}

TEST_CASE("tolerance schedules") {
  CHECK(evaluate_schedule(schedule::Fixed{1e-3}, 7) == 1e-3);
  CHECK(evaluate_schedule(schedule::Decaying{1.0, 1.0}, 3) == doctest::Approx(0.25));
  CHECK(evaluate_schedule(schedule::Relative{0.1}, 0, 0.5) == doctest::Approx(0.05));
  CHECK(evaluate_schedule(schedule::Relative{0.1}, 0, 4.0) == doctest::Approx(0.1));
  CHECK(evaluate_schedule(schedule::StepMatched{2.0, 0.25}, 9) == doctest::Approx(1.0));
  CHECK(evaluate_schedule(schedule::Relative{0.1}, 0, 0.0) > 0.0);
  CHECK(needs_gradient_norm(schedule::Relative{0.1}));
  CHECK_FALSE(needs_gradient_norm(schedule::Fixed{0.1}));
  CHECK_THROWS_AS(evaluate_schedule(schedule::Relative{0.1}, 2), Error);
  CHECK_THROWS_AS(validate_schedule(schedule::Fixed{0.0}), Error);
  CHECK_THROWS_AS(validate_schedule(schedule::Decaying{1.0, -1.0}), Error);
}

TEST_CASE("exact certificate requires a closed form") {
  TvRidgePotential tv(1e-3, 1e-2, 4, 4);
  CHECK_THROWS_AS(exact_certificate(tv, Vector::Zero(16), 1.0), Error);
  try {
    exact_certificate(tv, Vector::Zero(16), 1.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingExactProx);
  }
}

TEST_CASE("inner solver on tv reports honest residuals") {
  std::mt19937_64 rng(59);
  TvRidgePotential tv(0.2, 0.1, 6, 5);
  const Vector x = oracle::random_vector(rng, 30);
  const double gamma = 0.5;
  auto cert = solve_prox_subproblem(tv, x, EnvelopeParams(gamma, 30), 1e-3,
                                    plain_inner(300));
  const auto check = residual_at(tv, cert.point, x, gamma);
  CHECK(check.residual == doctest::Approx(cert.residual).epsilon(1e-12));
  CHECK(cert.converged == (cert.residual <= 1e-3));
  CHECK(cert.inner_iterations <= 300);
}
