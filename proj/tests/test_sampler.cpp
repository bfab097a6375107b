#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ssg/estimators.hpp"
#include "ssg/sampler.hpp"
#include "ssg/stats.hpp"

namespace {

using namespace ssg;

ChainConfig short_config(std::uint64_t seed) {
  ChainConfig cfg;
  cfg.n_sweeps = 6000;
  cfg.burn_in_sweeps = 500;
  cfg.seed = seed;
  return cfg;
}

ModelInstance two_atom_instance(std::size_t n, double theta) {
  const TransformContext ctx(builtin_measure("two_atom"));
  return ModelInstance::from_context(ctx, n, theta);
}

TEST(Stats, KsStatisticAndCdfs) {
  EXPECT_DOUBLE_EQ(ks_statistic({0.5}, [](double x) { return std::clamp(x, 0.0, 1.0); }), 0.5);
  EXPECT_NEAR(ks_statistic({0.1, 0.6}, [](double x) { return std::clamp(x, 0.0, 1.0); }), 0.4, 1e-15);
  EXPECT_NEAR(chi2_cdf(2.0, 2.0), 1.0 - std::exp(-1.0), 1e-15);
  EXPECT_EQ(chi2_cdf(-1.0, 3.0), 0.0);
  EXPECT_NEAR(normal_cdf(0.0, 4.0), 0.5, 1e-16);
  EXPECT_NEAR(normal_cdf(2.0, 4.0), 0.8413447460685429, 1e-15);
}

TEST(Diagnostics, WhiteNoiseEss) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  for (std::size_t n : {200, 5000, 40000}) {
    std::vector<double> x(n);
    for (auto& v : x) v = normal(rng);
    const double ess = effective_sample_size(x);
    EXPECT_GE(ess, 0.5 * n) << n;
    EXPECT_LE(ess, 1.5 * n) << n;
  }
}

TEST(Diagnostics, Ar1EssMatchesTheory) {
  // AR(1) with coefficient a: ESS / n -> (1 - a) / (1 + a)
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  const double a = 0.8;
  std::vector<double> x(200000);
  double state = 0.0;
  for (auto& v : x) v = state = a * state + normal(rng);
  EXPECT_NEAR(effective_sample_size(x) / x.size(), (1 - a) / (1 + a), 0.02);
}

TEST(Diagnostics, ConstantTraceConventions) {
  const std::vector<double> c(100, 3.0);
  EXPECT_EQ(effective_sample_size(c), 100.0);
  const std::vector<std::vector<double>> chains{c, c};
  EXPECT_EQ(gelman_rubin(chains), 1.0);
  EXPECT_THROW(effective_sample_size(std::vector<double>(5, 1.0)), std::invalid_argument);
}

TEST(Diagnostics, RhatDetectsDisagreement) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::vector<double> a(1000);
  std::vector<double> b(1000);
  for (auto& v : a) v = normal(rng);
  for (auto& v : b) v = 3.0 + normal(rng);
  const std::vector<std::vector<double>> chains{a, b};
  EXPECT_GT(gelman_rubin(chains), 1.5);
}

TEST(Sampler, IdenticalSeedChainsGiveRhatOne) {
  const auto inst = two_atom_instance(20, 0.5);
  const auto cfg = short_config(42);
  const std::vector<ChainResult> runs{gibbs_chain(inst, cfg), gibbs_chain(inst, cfg)};
  EXPECT_EQ(diagnostics(runs).rhat, 1.0);
}

TEST(Sampler, DetailedBalanceOnRandomPairs) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + trial % 7;
    std::vector<double> gammas(n);
    for (auto& x : gammas) x = unif(rng);
    std::sort(gammas.begin(), gammas.end());
    const ModelInstance inst(gammas, 4.0 * unif(rng) - 2.0, 1.0);
    std::vector<double> g(n);
    for (auto& x : g) x = normal(rng);
    const std::size_t i = trial % n;
    const double proposal = g[i] + 1.5 * normal(rng);
    const SpinState from(inst, g);
    auto moved = g;
    moved[i] = proposal;
    const SpinState to(inst, moved);
    // pi(g) min(1, pi(g')/pi(g)) = pi(g') min(1, pi(g)/pi(g')) with a symmetric proposal
    const double forward = log_target(inst, from) + log_acceptance(inst, from, i, proposal);
    const double backward = log_target(inst, to) + log_acceptance(inst, to, i, g[i]);
    EXPECT_NEAR(forward, backward, 1e-12 * (1.0 + std::abs(forward)));
    const double exact_ratio = log_target(inst, to) - log_target(inst, from);
    EXPECT_NEAR(metropolis_log_ratio(inst.theta() * n, from.energy_num(), from.norm_sq(), gammas[i], g[i], proposal),
                exact_ratio, 1e-12 * (1.0 + std::abs(exact_ratio)));
  }
}

TEST(Sampler, SeedDeterminism) {
  const auto inst = two_atom_instance(30, 0.5);
  auto cfg = short_config(9);
  cfg.tracked_coords = {0, 29};
  cfg.sample_functions = {SampleFunction::tanh};
  const auto a = gibbs_chain(inst, cfg);
  const auto b = gibbs_chain(inst, cfg);
  EXPECT_EQ(a.energy_trace, b.energy_trace);
  EXPECT_EQ(a.norm_sq_trace, b.norm_sq_trace);
  EXPECT_EQ(a.coord_traces, b.coord_traces);
  EXPECT_EQ(a.sample_mean_traces, b.sample_mean_traces);
  EXPECT_EQ(a.acceptance_rate, b.acceptance_rate);
  const auto c = gibbs_chain(inst, cfg, 1);
  EXPECT_NE(a.energy_trace, c.energy_trace);
}

TEST(Sampler, MultiThreadedPoolMatchesSerial) {
  const auto inst = two_atom_instance(25, 0.3);
  auto cfg = short_config(5);
  cfg.n_chains = 3;
  const auto serial = run_gibbs(inst, cfg, 1);
  const auto threaded = run_gibbs(inst, cfg, 3);
  EXPECT_EQ(serial.energy_trace, threaded.energy_trace);
  EXPECT_EQ(serial.segments, (std::vector<std::size_t>{5500, 5500, 5500}));
  EXPECT_EQ(serial.rhat_energy, threaded.rhat_energy);
}

TEST(Sampler, TraceLengthsAndThinning) {
  const auto inst = two_atom_instance(10, 0.2);
  auto cfg = short_config(1);
  cfg.n_sweeps = 1000;
  cfg.burn_in_sweeps = 101;
  cfg.thin = 7;
  cfg.tracked_coords = {3};
  cfg.store_states = true;
  const auto r = gibbs_chain(inst, cfg);
  const std::size_t expected = (1000 - 101) / 7;
  EXPECT_EQ(r.energy_trace.size(), expected);
  EXPECT_EQ(r.norm_sq_trace.size(), expected);
  EXPECT_EQ(r.coord_trace(3).size(), expected);
  EXPECT_EQ(r.states.size(), expected);
  EXPECT_GE(r.acceptance_rate, 0.0);
  EXPECT_LE(r.acceptance_rate, 1.0);
  EXPECT_THROW(r.coord_trace(4), std::invalid_argument);
  for (std::size_t t = 0; t < expected; ++t) EXPECT_EQ(r.coord_trace(3)[t], r.states[t][3]);
}

TEST(Sampler, ConfigValidation) {
  const auto inst = two_atom_instance(10, 0.2);
  auto cfg = short_config(1);
  cfg.burn_in_sweeps = cfg.n_sweeps;
  EXPECT_THROW(gibbs_chain(inst, cfg), std::invalid_argument);
  cfg = short_config(1);
  cfg.thin = 0;
  EXPECT_THROW(gibbs_chain(inst, cfg), std::invalid_argument);
  cfg = short_config(1);
  cfg.tracked_coords = {10};
  EXPECT_THROW(gibbs_chain(inst, cfg), std::invalid_argument);
}

TEST(Sampler, AdaptationFreezesAfterBurnIn) {
  const auto inst = two_atom_instance(40, 0.5);
  auto cfg = short_config(12);
  const auto longer = gibbs_chain(inst, cfg);
  cfg.n_sweeps = 3000;
  const auto shorter = gibbs_chain(inst, cfg);
  EXPECT_EQ(longer.final_step_size, shorter.final_step_size);
  // the shorter run is an exact prefix of the longer one
  ASSERT_EQ(shorter.energy_trace.size(), 2500u);
  for (std::size_t t = 0; t < shorter.energy_trace.size(); ++t)
    ASSERT_EQ(shorter.energy_trace[t], longer.energy_trace[t]);
  EXPECT_GT(longer.acceptance_rate, 0.3);
  EXPECT_LT(longer.acceptance_rate, 0.6);
}

TEST(Sampler, ThetaZeroIsStandardNormal) {
  const TransformContext ctx(builtin_measure("semicircle_shifted"));
  const auto inst = ModelInstance::from_context(ctx, 50, 0.0);
  auto cfg = short_config(21);
  cfg.n_sweeps = 12000;
  cfg.tracked_coords = {0, 25, 49};
  const auto r = gibbs_chain(inst, cfg);
  for (const auto& [d, trace] : r.coord_traces) {
    const auto est = estimate_mean(trace);
    EXPECT_LE(std::abs(est.value), 4.0 / std::sqrt(est.n_effective)) << d;
    EXPECT_NEAR(variance_of(trace), 1.0, 0.05) << d;
  }
  // |g|^2 ~ chi^2_N
  const auto norm = estimate_mean(r.norm_sq_trace);
  EXPECT_LE(std::abs(norm.value - 50.0), 3.0 * std::sqrt(2.0 * 50.0 / norm.n_effective));
}

TEST(Sampler, ConstantSpectrumIgnoresTheta) {
  const ModelInstance inst(std::vector<double>(30, 0.5), 1.7, 0.5);
  auto cfg = short_config(4);
  cfg.n_sweeps = 12000;
  cfg.tracked_coords = {7};
  const auto r = gibbs_chain(inst, cfg);
  EXPECT_NEAR(variance_of(r.coord_trace(7)), 1.0, 0.05);
  for (double h : r.energy_trace) EXPECT_NEAR(h, 0.5, 1e-12);
}

TEST(Sampler, TwoAtomEnergyConcentratesAtV) {
  const auto inst = two_atom_instance(400, 0.5);
  ChainConfig cfg;
  cfg.seed = 2024;
  const auto r = gibbs_chain(inst, cfg);
  const auto est = estimate_mean(r.energy_trace);
  EXPECT_LE(std::abs(est.value - std::numbers::sqrt2 / 2.0), 3.0 * est.std_error)
      << "mean " << est.value << " se " << est.std_error;
}

TEST(Sampler, DecoupledCoordinateIsExactGaussian) {
  const TransformContext ctx(builtin_measure("two_atom"));
  const auto inst = ModelInstance::from_context(ctx, 100, 0.5);
  const double v = ctx.v_of_theta(0.5);
  for (std::size_t d : {std::size_t{0}, std::size_t{99}}) {
    auto cfg = short_config(31 + d);
    cfg.n_sweeps = 20500;
    cfg.tracked_coords = {d};
    const auto r = decoupled_chain(inst, d, v, cfg);
    const double sigma2 = ctx.sigma2(0.5, inst.eigenvalue(d));
    const double n = static_cast<double>(r.length());
    EXPECT_NEAR(variance_of(r.coord_trace(d)), sigma2, 3.0 * std::sqrt(2.0 / n) * sigma2) << d;
  }
  EXPECT_NEAR(ctx.sigma2(0.5, 1.0), std::numbers::sqrt2, 1e-12);
}

TEST(Sampler, DecoupledAtThetaZeroIsStandardNormal) {
  const TransformContext ctx(builtin_measure("uniform"));
  const auto inst = ModelInstance::from_context(ctx, 40, 0.0);
  auto cfg = short_config(17);
  cfg.n_sweeps = 12000;
  cfg.tracked_coords = {5, 20};
  const auto r = decoupled_chain(inst, 5, inst.mean_eigenvalue(), cfg);
  EXPECT_NEAR(variance_of(r.coord_trace(5)), 1.0, 0.05);
  EXPECT_NEAR(variance_of(r.coord_trace(20)), 1.0, 0.05);
}

}  // namespace
