#include "ipula/verify.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <type_traits>

#include "ipula/diagnostics.hpp"
#include "ipula/envelope.hpp"
#include "ipula/parallel.hpp"
#include "ipula/potentials.hpp"
#include "ipula/rng.hpp"
#include "ipula/samplers.hpp"

namespace ipula {

namespace {

constexpr double kIdentityTolerance = 1e-10;
constexpr double kConstantTauTolerance = 1e-12;
constexpr double kScalingTarget = 2.0;
constexpr double kScalingSlack = 0.1;
constexpr double kNoiseFloorDrift = 0.3;
constexpr double kW2Fraction = 0.05;
constexpr double kGapSeMultiplier = 3.0;

CheckResult make_result(std::string name, std::string group, double bound,
                        double observed, bool pass, std::string detail = {}) {
  CheckResult r;
  r.name = std::move(name);
  r.group = std::move(group);
  r.bound = bound;
  r.observed = observed;
  r.margin = bound - observed;
  r.pass = pass;
  r.detail = std::move(detail);
  return r;
}

Vector gaussian_vector(std::mt19937_64& rng, std::size_t n, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  return v;
}

double rel_err(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

double rel_err(const Vector& a, const Vector& b) {
  return (a - b).lpNorm<Eigen::Infinity>() / (1.0 + b.lpNorm<Eigen::Infinity>());
}

SamplerConfig fixture_config(const QuadraticFixture& f, std::size_t steps,
                             std::uint64_t seed) {
  SamplerConfig c;
  c.gamma = f.gamma;
  c.eta = f.eta;
  c.steps = steps;
  c.seed = seed;
  return c;
}

// Worst ratio over a family of pathwise transfer verdicts.
struct TransferSummary {
  TransferVerdict worst;
  std::size_t worst_path = 0;
  std::size_t failing_paths = 0;
};

TransferSummary summarize(const std::vector<TransferVerdict>& verdicts) {
  TransferSummary s;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    if (!verdicts[i].pass) ++s.failing_paths;
    if (i == 0 || verdicts[i].max_ratio > s.worst.max_ratio) {
      s.worst = verdicts[i];
      s.worst_path = i;
    }
  }
  return s;
}

CheckResult transfer_result(const std::string& name, const std::string& group,
                            const TransferSummary& s, std::size_t paths) {
  return make_result(
      name, group, s.worst.worst_bound, s.worst.worst_distance,
      s.failing_paths == 0,
      fmt::format("worst ratio {} at path {} k {}; {} of {} paths violate",
                  s.worst.max_ratio, s.worst_path, s.worst.worst_k,
                  s.failing_paths, paths));
}

std::vector<double> schedule_values(const ToleranceSchedule& s,
                                    std::size_t steps) {
  std::vector<double> taus(steps);
  for (std::size_t k = 0; k < steps; ++k) taus[k] = evaluate_schedule(s, k);
  return taus;
}

void scale_schedule(ToleranceSchedule& s, double factor) {
  std::visit(
      [&](auto& sch) {
        if constexpr (std::is_same_v<std::decay_t<decltype(sch)>, schedule::Fixed>) {
          sch.eps *= factor;
        } else {
          sch.c *= factor;
        }
      },
      s);
}

}  // namespace

const std::vector<std::string>& verify_groups() {
  static const std::vector<std::string> groups{
      "identities", "residual", "transfer", "adaptive",
      "gap",        "scaling",  "stationary"};
  return groups;
}

std::vector<CheckResult> check_moreau_identities(std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, Stream::InnerInit, 1));
  const std::size_t n = 10;
  const double sigma = 1.0;
  const Vector center = gaussian_vector(rng, n, 1.0);
  auto quad = std::make_shared<QuadraticPotential>(sigma, center);
  std::vector<CheckResult> out;
  for (double gamma : {0.1, 1.0, 10.0}) {
    const double m = sigma / (1.0 + gamma * sigma);
    double worst = std::abs(BoundParams::make(sigma, gamma, 0.1, 0.0, n).m_gamma - m);
    std::size_t worst_i = 0;
    for (std::size_t i = 0; i < 1000; ++i) {
      const Vector x = gaussian_vector(rng, n, 5.0);
      const ProxCertificate cert = exact_certificate(*quad, x, gamma);
      const Vector prox = (x + gamma * sigma * center) / (1.0 + gamma * sigma);
      const Vector grad = m * (x - center);
      const double env = 0.5 * m * (x - center).squaredNorm();
      const double e = std::max(
          {rel_err(cert.point, prox),
           rel_err(inexact_moreau_gradient(cert, x, gamma), grad),
           rel_err(moreau_envelope_value(*quad, x, cert, gamma), env)});
      if (e > worst) {
        worst = e;
        worst_i = i;
      }
    }
    out.push_back(make_result(fmt::format("moreau_identities/gamma={}", gamma),
                              "identities", kIdentityTolerance, worst,
                              worst <= kIdentityTolerance,
                              fmt::format("worst relative error at point {}", worst_i)));
  }
  return out;
}

std::vector<CheckResult> check_residual_soundness(const VerifySpec& spec,
                                                  std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, Stream::InnerInit, 2));
  const std::size_t n = 50;
  ElasticNetPotential en(0.5, 1.0, n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> budget(1, 400);

  double worst_ratio = 0.0, worst_err = 0.0, worst_res = 0.0;
  std::size_t worst_i = 0, violations = 0, in_band = 0;
  for (std::size_t i = 0; i < spec.residual_anchors; ++i) {
    const double gamma = std::pow(10.0, -1.0 + 2.0 * unit(rng));
    const double target = std::pow(10.0, -6.0 + 5.0 * unit(rng));
    const double modulus = 1.0 + 1.0 / gamma;
    InnerSolverConfig solver;
    solver.max_inner_iterations = budget(rng);
    solver.step_rule = unit(rng) < 0.5 ? StepRule::StronglyConvexDecay
                                       : StepRule::ConstantOverSqrtK;
    // An inflated modulus shortens the steps, so the solve stalls at the
    // requested level instead of landing on the prox in one step.
    solver.strong_convexity_hint =
        std::pow(2.0, 1.0 + 3.0 * unit(rng)) * modulus - 1.0 / gamma;
    const Vector x = gaussian_vector(rng, n, 2.0);
    const Vector exact = *en.exact_prox(x, gamma);
    // Warm start off the prox along its support, with residual up to 100x
    // the target.
    Vector dir = gaussian_vector(rng, n, 1.0);
    for (Eigen::Index j = 0; j < dir.size(); ++j) {
      if (exact[j] == 0.0) dir[j] = 0.0;
    }
    const double start_residual = target * std::pow(10.0, 2.0 * unit(rng));
    Vector warm = exact;
    if (dir.norm() > 0.0) warm += dir * (start_residual / (modulus * dir.norm()));
    const EnvelopeParams params(gamma, n);
    const ProxCertificate cert =
        solve_prox_subproblem(en, x, params, target, solver, warm);
    const double err = (inexact_moreau_gradient(cert, x, gamma) - (x - exact) / gamma).norm();
    // Both sides are computed in floating point; allow a few ulps of the
    // gradient scale.
    const double slack =
        64.0 * std::numeric_limits<double>::epsilon() * (1.0 + x.norm()) / gamma;
    if (err > cert.residual + slack) ++violations;
    if (cert.residual >= 1e-6 && cert.residual <= 1e-1) ++in_band;
    const double ratio = err / (cert.residual + slack);
    if (i == 0 || ratio > worst_ratio) {
      worst_ratio = ratio;
      worst_err = err;
      worst_res = cert.residual;
      worst_i = i;
    }
  }
  return {make_result(
      "residual_soundness", "residual", worst_res, worst_err, violations == 0,
      fmt::format("{} violations over {} anchors; worst ratio {} at anchor {}; "
                  "{} residuals in [1e-6, 1e-1]",
                  violations, spec.residual_anchors, worst_ratio, worst_i,
                  in_band))};
}

std::vector<CheckResult> check_fixed_transfer(const VerifySpec& spec,
                                              std::uint64_t seed,
                                              std::size_t threads) {
  const QuadraticFixture f;
  auto quad = std::make_shared<QuadraticPotential>(f.sigma,
                                                   Vector::Zero(f.dimension));
  const std::size_t steps = spec.coupled_steps;
  const std::size_t seeds = spec.coupled_seeds;
  const auto& deltas = spec.deltas;

  // One coupled path per (delta, seed); both checkers read the same paths.
  std::vector<CoupledTrace> paths(deltas.size() * seeds);
  parallel_for(paths.size(), threads, [&](std::size_t idx) {
    const std::size_t d = idx / seeds, s = idx % seeds;
    const std::uint64_t path_seed = derive_seed(seed, Stream::Replicate, s);
    std::mt19937_64 init(derive_seed(path_seed, Stream::InnerInit));
    const Vector x0 = gaussian_vector(init, f.dimension, 3.0);
    paths[idx] = run_coupled(quad, fixture_config(f, steps, path_seed), x0,
                             coupling::InjectedFixed{
                                 deltas[d] * spec.injected_delta_multiplier});
  });

  std::vector<CheckResult> out;
  std::size_t control_fail = 0;
  for (std::size_t d = 0; d < deltas.size(); ++d) {
    const auto p = BoundParams::make(f.sigma, f.gamma, f.eta, deltas[d], f.dimension);
    const auto bound = certified_transfer_curve(
        p, steps, std::vector<double>(steps, deltas[d]));
    const auto halved = certified_transfer_curve(
        p, steps, std::vector<double>(steps, 0.5 * deltas[d]));
    std::vector<TransferVerdict> verdicts;
    for (std::size_t s = 0; s < seeds; ++s) {
      const auto& dist = paths[d * seeds + s].distances;
      verdicts.push_back(check_transfer(dist, bound));
      if (!check_transfer(dist, halved).pass) ++control_fail;
    }
    out.push_back(transfer_result(fmt::format("transfer_fixed/delta={}", deltas[d]),
                                  "transfer", summarize(verdicts), seeds));
  }
  // The checker must reject every path when handed half the injected delta.
  const double total = static_cast<double>(paths.size());
  CheckResult control = make_result(
      "transfer_negative_control", "transfer", total,
      static_cast<double>(control_fail), control_fail == paths.size(),
      fmt::format("{} of {} paths rejected with delta/2 in the bound",
                  control_fail, paths.size()));
  control.margin = control.observed - control.bound;
  out.push_back(std::move(control));
  return out;
}

std::vector<CheckResult> check_adaptive_transfer(const VerifySpec& spec,
                                                 std::uint64_t seed,
                                                 std::size_t threads) {
  const QuadraticFixture f;
  auto quad = std::make_shared<QuadraticPotential>(f.sigma,
                                                   Vector::Zero(f.dimension));
  const std::size_t steps = spec.coupled_steps;
  const std::size_t seeds = spec.coupled_seeds;
  const auto p = BoundParams::make(f.sigma, f.gamma, f.eta, 0.0, f.dimension);

  struct Case {
    std::string name;
    ToleranceSchedule schedule;
  };
  const std::vector<Case> cases{
      {"transfer_adaptive/decaying", schedule::Decaying{1.0, 1.0}},
      {"transfer_adaptive/step_matched", schedule::StepMatched{1.0, f.eta}}};

  std::vector<CheckResult> out;
  for (const auto& c : cases) {
    const auto taus = schedule_values(c.schedule, steps);
    std::vector<double> injected = taus;
    for (double& t : injected) t *= spec.injected_delta_multiplier;
    const auto bound = certified_transfer_curve(p, steps, taus);
    std::vector<TransferVerdict> verdicts(seeds);
    parallel_for(seeds, threads, [&](std::size_t s) {
      const std::uint64_t path_seed = derive_seed(seed, Stream::Replicate, s);
      std::mt19937_64 init(derive_seed(path_seed, Stream::InnerInit));
      const Vector x0 = gaussian_vector(init, f.dimension, 3.0);
      ToleranceSchedule injected_schedule = c.schedule;
      scale_schedule(injected_schedule, spec.injected_delta_multiplier);
      const auto trace =
          run_coupled(quad, fixture_config(f, steps, path_seed), x0,
                      coupling::InjectedSchedule{injected_schedule});
      verdicts[s] = check_transfer(trace.distances, bound);
    });
    out.push_back(transfer_result(c.name, "adaptive", summarize(verdicts), seeds));
  }

  // Constant tau reduces the adaptive bounds to the fixed ones.
  double worst = 0.0;
  for (double delta : spec.deltas) {
    const auto pd = BoundParams::make(f.sigma, f.gamma, f.eta, delta, f.dimension);
    const std::vector<double> constant(steps, delta);
    const auto transfer = adaptive_transfer_curve(pd, steps, constant);
    const auto gap = adaptive_gap_curve(pd, steps, 1.0, constant);
    for (std::size_t k = 0; k <= steps; ++k) {
      worst = std::max(worst, rel_err(transfer[k], transfer_bound(pd, k)));
      // The fixed gap bound uses the full geometric sum; the adaptive one
      // carries the finite-k factor (1 - rho^k).
      const double rk = std::pow(contraction_rho(pd), static_cast<double>(k));
      const double fixed_k = rk + (fixed_gap_bound(pd, k, 1.0) - rk) * (1.0 - rk);
      worst = std::max(worst, rel_err(gap[k], fixed_k));
    }
  }
  out.push_back(make_result("adaptive_constant_tau_identity", "adaptive",
                            kConstantTauTolerance, worst,
                            worst <= kConstantTauTolerance,
                            "max relative gap between constant-tau adaptive "
                            "and fixed curves"));
  return out;
}

std::vector<CheckResult> check_objective_gap(const VerifySpec& spec,
                                             std::uint64_t seed,
                                             std::size_t threads) {
  const QuadraticFixture f;
  auto quad = std::make_shared<QuadraticPotential>(f.sigma,
                                                   Vector::Zero(f.dimension));
  const std::size_t steps = spec.gap_steps;
  const std::size_t reps = spec.gap_replicas;
  const Vector x0 = Vector::Constant(static_cast<Eigen::Index>(f.dimension), 1.5);

  // gaps[k * reps + r]: exact envelope gap of replica r at step k. The
  // minimum of U_gamma is 0 at the centre.
  std::vector<double> gaps((steps + 1) * reps);
  std::vector<double> max_residual(reps, 0.0);
  parallel_for(reps, threads, [&](std::size_t r) {
    SamplerConfig c = fixture_config(f, steps, derive_seed(seed, Stream::Replicate, r));
    c.schedule = schedule::Fixed{spec.gap_epsilon};
    c.track_envelope = false;
    const auto trace = run_chain(
        SamplerKind::Ipula, quad, c, x0,
        [&](std::size_t k, const Vector& x, const ChainRecord& rec) {
          const ProxCertificate cert = exact_certificate(*quad, x, f.gamma);
          gaps[k * reps + r] = moreau_envelope_value(*quad, x, cert, f.gamma);
          if (k < steps) max_residual[r] = std::max(max_residual[r], rec.residual);
        });
    (void)trace;
  });

  const auto p = BoundParams::make(f.sigma, f.gamma, f.eta, spec.gap_epsilon,
                                   f.dimension);
  const double gap0 =
      moreau_envelope_value(*quad, x0, exact_certificate(*quad, x0, f.gamma), f.gamma);
  double worst_margin = std::numeric_limits<double>::infinity();
  std::size_t worst_k = 0;
  double worst_bound = 0.0, worst_mean = 0.0;
  std::vector<double> centred(reps);
  for (std::size_t k = 0; k <= steps; ++k) {
    std::span<const double> row(gaps.data() + k * reps, reps);
    const double mean = pairwise_sum(row) / static_cast<double>(reps);
    for (std::size_t r = 0; r < reps; ++r) {
      centred[r] = (row[r] - mean) * (row[r] - mean);
    }
    const double var = pairwise_sum(centred) / static_cast<double>(reps - 1);
    const double se = std::sqrt(var / static_cast<double>(reps));
    const double bound = fixed_gap_bound(p, k, gap0) + kGapSeMultiplier * se;
    if (bound - mean < worst_margin) {
      worst_margin = bound - mean;
      worst_k = k;
      worst_bound = bound;
      worst_mean = mean;
    }
  }
  const double max_res = *std::max_element(max_residual.begin(), max_residual.end());
  const bool certified = max_res <= spec.gap_epsilon;
  return {make_result(
      "objective_gap", "gap", worst_bound, worst_mean,
      worst_margin >= 0.0 && certified,
      fmt::format("tightest at k {}; bound includes 3 standard errors; max "
                  "certified residual {} vs epsilon {}",
                  worst_k, max_res, spec.gap_epsilon))};
}

std::vector<CheckResult> check_step_matched_scaling() {
  // Quadratic fixture with gamma = 10 so that L_gamma eta stays small.
  const double sigma = 1.0, gamma = 10.0, c = 1.0;
  const std::size_t n = 10;
  const std::vector<double> etas{0.2, 0.1, 0.05};
  std::vector<StepMatchedTerms> terms;
  for (double eta : etas) {
    terms.push_back(step_matched_terms(BoundParams::make(sigma, gamma, eta, 0.0, n), c));
  }
  double worst_ratio_dev = 0.0, worst_ratio = kScalingTarget, worst_drift = 0.0;
  for (std::size_t i = 0; i + 1 < terms.size(); ++i) {
    const double ratio = terms[i].oracle_floor / terms[i + 1].oracle_floor;
    if (std::abs(ratio - kScalingTarget) > worst_ratio_dev) {
      worst_ratio_dev = std::abs(ratio - kScalingTarget);
      worst_ratio = ratio;
    }
    worst_drift = std::max(
        worst_drift, std::abs(terms[i].noise_floor / terms[i + 1].noise_floor - 1.0));
  }
  return {make_result("step_matched_oracle_scaling", "scaling", kScalingSlack,
                      worst_ratio_dev, worst_ratio_dev <= kScalingSlack,
                      fmt::format("worst halving ratio {} (target 2)", worst_ratio)),
          make_result("step_matched_noise_stability", "scaling", kNoiseFloorDrift,
                      worst_drift, worst_drift < kNoiseFloorDrift,
                      "max relative change of the noise floor per halving")};
}

std::vector<CheckResult> check_stationary_1d(const VerifySpec& spec,
                                             std::uint64_t seed,
                                             std::size_t threads) {
  const double sigma = 1.0, gamma = 1.0, mu = 0.5;
  const double eta = 0.01 * gamma;
  const std::size_t chains = spec.stationary_chains;
  const std::size_t per_chain = std::max<std::size_t>(1, spec.stationary_samples / chains);
  const std::size_t thin = 10, burn_in = 1000;
  auto quad = std::make_shared<QuadraticPotential>(sigma, Vector::Constant(1, mu));

  std::vector<double> samples(chains * per_chain);
  parallel_for(chains, threads, [&](std::size_t i) {
    SamplerConfig c;
    c.gamma = gamma;
    c.eta = eta;
    c.steps = burn_in + per_chain * thin - 1;
    c.seed = derive_seed(seed, Stream::Replicate, i);
    c.schedule = schedule::Fixed{1e-10};
    c.track_envelope = false;
    run_chain(SamplerKind::Ipula, quad, c, Vector::Constant(1, mu),
              [&](std::size_t k, const Vector& x, const ChainRecord&) {
                if (k >= burn_in && (k - burn_in) % thin == 0) {
                  samples[i * per_chain + (k - burn_in) / thin] = x[0];
                }
              });
  });
  const double m = sigma / (1.0 + gamma * sigma);
  const double sd = std::sqrt(1.0 / m);
  const double w2 = w2_to_gaussian_1d(samples, mu, sd);
  const double bound = kW2Fraction * sd;
  return {make_result("stationary_1d_w2", "stationary", bound, w2, w2 <= bound,
                      fmt::format("{} samples from {} chains, thinning {}, "
                                  "burn-in {}",
                                  samples.size(), chains, thin, burn_in))};
}

std::vector<CheckResult> run_verify_suite(const VerifySpec& spec,
                                          std::uint64_t seed,
                                          std::size_t threads) {
  for (const auto& name : spec.checks) {
    const auto& g = verify_groups();
    if (std::find(g.begin(), g.end(), name) == g.end()) {
      throw Error(ErrorCode::ConfigError,
                  "verify.checks: unknown check group '" + name + "'");
    }
  }
  auto selected = [&](const std::string& group) {
    return spec.checks.empty() ||
           std::find(spec.checks.begin(), spec.checks.end(), group) !=
               spec.checks.end();
  };
  std::vector<CheckResult> out;
  auto add = [&](const std::string& group, auto&& run) {
    if (!selected(group)) {
      CheckResult r;
      r.name = group;
      r.group = group;
      r.skipped = true;
      r.detail = "not selected in verify.checks";
      out.push_back(std::move(r));
      return;
    }
    for (auto& r : run()) out.push_back(std::move(r));
  };
  add("identities", [&] { return check_moreau_identities(seed); });
  add("residual", [&] { return check_residual_soundness(spec, seed); });
  add("transfer", [&] { return check_fixed_transfer(spec, seed, threads); });
  add("adaptive", [&] { return check_adaptive_transfer(spec, seed, threads); });
  add("gap", [&] { return check_objective_gap(spec, seed, threads); });
  add("scaling", [&] { return check_step_matched_scaling(); });
  add("stationary", [&] { return check_stationary_1d(spec, seed, threads); });
  return out;
}

bool suite_passes(const std::vector<CheckResult>& results, bool allow_skips) {
  for (const auto& r : results) {
    if (r.skipped ? !allow_skips : !r.pass) return false;
  }
  return true;
}

}  // namespace ipula
