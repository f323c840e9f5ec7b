#include "doctest.h"

#include <cmath>
#include <memory>
#include <random>

#include "ipula/diagnostics.hpp"
#include "ipula/samplers.hpp"
#include "oracles.hpp"

using namespace ipula;

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

SamplerConfig quad_config(double gamma, double eta, std::size_t steps,
                          std::uint64_t seed = 1) {
  SamplerConfig c;
  c.gamma = gamma;
  c.eta = eta;
  c.steps = steps;
  c.seed = seed;
  c.inner.use_exact_prox = true;
  return c;
}

std::shared_ptr<TvDeblurPotential> tiny_deblur(std::mt19937_64& rng,
                                               double tv = 0.05) {
  auto blur = std::make_shared<const BlurOperator>(BlurOperator::box(6, 5, 3));
  const Vector obs = oracle::random_vector(rng, 30, 0.5);
  return std::make_shared<TvDeblurPotential>(blur, obs, 0.1, tv, 0.2);
}

}  // namespace

TEST_CASE("step-size validation") {
  SamplerConfig c = quad_config(1.0, 1.0, 10);
  CHECK_THROWS_AS(c.validate(), Error);
  c.eta = 0.99;
  CHECK_NOTHROW(c.validate());
  CHECK_THROWS_AS(c.validate(true), Error);
  c.eta = 0.49;
  CHECK_NOTHROW(c.validate(true));
  try {
    quad_config(1.0, 2.0, 10).validate();
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StepSizeOutOfRange);
  }
}

TEST_CASE("zero-noise step equals the deterministic envelope step") {
  auto q = std::make_shared<QuadraticPotential>(1.0, Vector::Zero(1));
  SamplerConfig c = quad_config(1.0, 0.25, 1);
  const Vector z = scalar(0.0);
  auto r = ipula_step(scalar(2.0), *q, c, 0, std::nullopt, z);
  CHECK(r.next_state[0] == doctest::Approx(1.75));
  CHECK(exact_moreau_ula_step(scalar(2.0), *q, c, z)[0] == doctest::Approx(1.75));

  // Same through the zero_noise hook: draws are consumed, increments are 0.
  c.zero_noise = true;
  GaussianStream rng(9);
  auto h = ipula_step(scalar(2.0), *q, c, 0, std::nullopt, rng);
  CHECK(h.next_state[0] == doctest::Approx(1.75));
  CHECK(rng.draw_count() == 1);
}

TEST_CASE("state at the prox point moves by noise only") {
  // Minimizer of U is its own prox point.
  auto q = std::make_shared<QuadraticPotential>(2.0, scalar(0.3));
  SamplerConfig c = quad_config(1.0, 0.25, 1);
  const Vector z = scalar(1.7);
  auto r = ipula_step(scalar(0.3), *q, c, 0, std::nullopt, z);
  CHECK(r.next_state[0] == doctest::Approx(0.3 + std::sqrt(0.5) * 1.7));
}

TEST_CASE("exact and zero-residual iPULA chains are bitwise identical") {
  auto en = std::make_shared<ElasticNetPotential>(0.5, 1.0, 7);
  SamplerConfig c = quad_config(0.5, 0.1, 300, 1234);
  c.store_states = true;
  const Vector x0 = Vector::LinSpaced(7, -2.0, 2.0);
  auto a = run_chain(SamplerKind::Ipula, en, c, x0);
  auto b = run_chain(SamplerKind::ExactUla, en, c, x0);
  REQUIRE(a.iterations.size() == b.iterations.size());
  for (std::size_t i = 0; i < a.iterations.size(); ++i) {
    CHECK((*a.iterations[i].state - *b.iterations[i].state).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK((a.final_state - b.final_state).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("run_chain edge cases and determinism") {
  auto q = std::make_shared<QuadraticPotential>(1.0, Vector::Zero(3));
  SamplerConfig c = quad_config(1.0, 0.2, 0);
  auto t0 = run_chain(SamplerKind::Ipula, q, c, Vector::Ones(3));
  CHECK(t0.iterations.size() == 1);
  CHECK(t0.rng_draw_count == 0);
  CHECK(t0.final_state == Vector::Ones(3));

  c.steps = 50;
  c.record_every = 7;
  auto t1 = run_chain(SamplerKind::Ipula, q, c, Vector::Ones(3));
  auto t2 = run_chain(SamplerKind::Ipula, q, c, Vector::Ones(3));
  CHECK(t1.iterations.size() == 8);  // k = 0, 7, ..., 49
  REQUIRE(t1.iterations.size() == t2.iterations.size());
  for (std::size_t i = 0; i < t1.iterations.size(); ++i) {
    CHECK(t1.iterations[i].potential_value == t2.iterations[i].potential_value);
  }
  CHECK(t1.final_state == t2.final_state);

  c.record_every = 10;
  auto t3 = run_chain(SamplerKind::Ipula, q, c, Vector::Ones(3));
  CHECK(t3.iterations.size() == 6);
  CHECK(t3.iterations.back().k == 50);
}

TEST_CASE("every sampler draws exactly one Gaussian vector per step") {
  std::mt19937_64 rng(71);
  auto p = tiny_deblur(rng);
  SamplerConfig c;
  c.gamma = 0.5;
  c.eta = 0.05;
  c.steps = 40;
  c.inner.max_inner_iterations = 15;
  c.schedule = schedule::Fixed{1e-3};
  for (auto kind : {SamplerKind::Ipula, SamplerKind::Myula, SamplerKind::GradSub,
                    SamplerKind::ProxSub}) {
    auto t = run_chain(kind, p, c, Vector::Zero(30));
    CHECK(t.rng_draw_count == 40 * 30);
    CHECK(t.final_state.allFinite());
  }
  auto q = std::make_shared<QuadraticPotential>(1.0, Vector::Zero(30));
  auto t = run_chain(SamplerKind::ExactUla, q, quad_config(0.5, 0.05, 40), Vector::Zero(30));
  CHECK(t.rng_draw_count == 40 * 30);
}

TEST_CASE("baseline reductions") {
  // g = 0: MYULA is ULA on f. For a quadratic that is also Grad-sub.
  auto q = std::make_shared<QuadraticPotential>(1.5, scalar(0.2));
  SamplerConfig c = quad_config(1.0, 0.1, 1);
  const Vector z = scalar(0.8);
  const Vector x = scalar(-1.1);
  const double ula = x[0] - 0.1 * 1.5 * (x[0] - 0.2) + std::sqrt(0.2) * 0.8;
  CHECK(myula_step(x, *q, c, z).next_state[0] == doctest::Approx(ula));
  CHECK(gradsub_step(x, *q, c, z)[0] == doctest::Approx(ula));
  CHECK(proxsub_step(x, *q, c, z).next_state[0] == doctest::Approx(ula));

  // f = 0 with exact g-prox: MYULA on the L1 potential matches the exact
  // envelope chain.
  auto l1 = std::make_shared<L1Potential>(0.7, 4);
  const Vector x4 = Vector::LinSpaced(4, -1.0, 2.0);
  const Vector z4 = Vector::LinSpaced(4, 0.3, -0.5);
  SamplerConfig c4 = quad_config(0.6, 0.2, 1);
  const Vector my = myula_step(x4, *l1, c4, z4).next_state;
  const Vector ex = exact_moreau_ula_step(x4, *l1, c4, z4);
  CHECK((my - ex).norm() < 1e-14);
}

TEST_CASE("prox-sub with tv off applies the ridge shrinkage") {
  auto blur = std::make_shared<const BlurOperator>(BlurOperator::box(4, 4, 3));
  std::mt19937_64 rng(73);
  const Vector obs = oracle::random_vector(rng, 16);
  auto p = std::make_shared<TvDeblurPotential>(blur, obs, 0.5, 0.0, 1e-2);
  SamplerConfig c = quad_config(1e-3, 0.4e-3, 1);
  const Vector x = oracle::random_vector(rng, 16);
  const Vector z = oracle::random_vector(rng, 16);
  const Vector forward = x - c.eta * *p->smooth_part_gradient(x);
  const Vector expect = forward / (1.0 + c.eta * 1e-2) + std::sqrt(2.0 * c.eta) * z;
  CHECK((proxsub_step(x, *p, c, z).next_state - expect).norm() < 1e-12);
}

TEST_CASE("missing capabilities are reported") {
  std::mt19937_64 rng(79);
  auto p = tiny_deblur(rng);
  SamplerConfig c = quad_config(0.5, 0.1, 5);
  CHECK_THROWS_AS(run_chain(SamplerKind::ExactUla, p, c, Vector::Zero(30)), Error);
  CHECK_THROWS_AS(run_coupled(p, c, Vector::Zero(30), coupling::InjectedFixed{0.1}), Error);
}

TEST_CASE("relative schedule runs and residuals respect tolerances when converged") {
  auto en = std::make_shared<ElasticNetPotential>(0.4, 0.9, 5);
  SamplerConfig c;
  c.gamma = 1.0;
  c.eta = 0.2;
  c.steps = 60;
  c.schedule = schedule::Relative{0.05};
  c.inner.max_inner_iterations = 500;
  auto t = run_chain(SamplerKind::Ipula, en, c, Vector::Constant(5, 3.0));
  for (const auto& r : t.iterations) {
    CHECK(r.tolerance_used > 0.0);
    if (r.converged) CHECK(r.residual <= r.tolerance_used);
    CHECK(r.envelope_upper <= r.potential_value + 1e-12);
  }
}

TEST_CASE("coupled chains") {
  auto q = std::make_shared<QuadraticPotential>(1.0, Vector::Zero(10));
  SamplerConfig c = quad_config(1.0, 0.1, 200, 5);
  const Vector x0 = Vector::Constant(10, 1.0);

  auto zero = run_coupled(q, c, x0, coupling::InjectedFixed{0.0});
  for (double d : zero.distances) CHECK(d == 0.0);
  CHECK(zero.distances.size() == 201);
  CHECK(zero.shared_draw_count == 200 * 10);

  const auto p = BoundParams::make(1.0, 1.0, 0.1, 0.3, 10);
  auto inj = run_coupled(q, c, x0, coupling::InjectedFixed{0.3});
  const std::vector<double> caps(200, 0.3), half(200, 0.15);
  CHECK(check_transfer(inj.distances, certified_transfer_curve(p, 200, caps)).pass);
  CHECK_FALSE(check_transfer(inj.distances, certified_transfer_curve(p, 200, half)).pass);
  // k = 1 is the equality case: d_1 = eta * delta.
  CHECK(inj.distances[1] == doctest::Approx(0.03).epsilon(1e-14));

  // Genuine inner-solver error on the elastic net, bounded via residuals.
  auto en = std::make_shared<ElasticNetPotential>(0.5, 1.0, 10);
  SamplerConfig ce = c;
  ce.inner.use_exact_prox = false;
  ce.inner.max_inner_iterations = 5;
  auto organic = run_coupled(en, ce, x0, coupling::InexactInner{schedule::Fixed{1e-2}});
  const auto pe = BoundParams::make(1.0, 1.0, 0.1, 0.0, 10);
  const auto curve = certified_transfer_curve(pe, 200, organic.error_caps);
  CHECK(check_transfer(organic.distances, curve).pass);
}

TEST_CASE("exact chain mean approaches the target mean") {
  const double mu = 1.5;
  auto q = std::make_shared<QuadraticPotential>(1.0, scalar(mu));
  const std::size_t chains = 500;
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < chains; ++i) {
    SamplerConfig c = quad_config(1.0, 0.2, 200, derive_seed(77, Stream::Replicate, i));
    c.record_every = 200;
    auto t = run_chain(SamplerKind::ExactUla, q, c, scalar(-3.0));
    sum += t.final_state[0];
    sq += t.final_state[0] * t.final_state[0];
  }
  const double mean = sum / chains;
  const double var = sq / chains - mean * mean;
  CHECK(std::abs(mean - mu) <= 3.0 * std::sqrt(var / chains));
}

TEST_CASE("sampler kind names round-trip") {
  for (auto k : {SamplerKind::Ipula, SamplerKind::ExactUla, SamplerKind::Myula,
                 SamplerKind::GradSub, SamplerKind::ProxSub}) {
    CHECK(parse_sampler_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_sampler_kind("hmc"), Error);
}
