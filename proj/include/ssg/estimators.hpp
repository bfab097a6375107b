#pragma once

// Reductions from chain output to the quantities checked against the
// large-N theory: energy concentration a_N, the cavity error <|eps_N|>,
// the free energy by thermodynamic integration, marginal and joint
// decoupling tests, sample means and their variance scaling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssg/model.hpp"
#include "ssg/parallel.hpp"
#include "ssg/quadrature.hpp"
#include "ssg/sampler.hpp"
#include "ssg/stats.hpp"
#include "ssg/transforms.hpp"

namespace ssg {

struct EstimateWithError {
  double value = 0.0;
  double std_error = 0.0;  // sample_std / sqrt(n_effective)
  double n_effective = 0.0;
};

inline constexpr double kMinTestEss = 200.0;
inline constexpr double kKsCritical = 1.63;

/// Mean of `trace` with an ESS-adjusted standard error. `segments` lists the
/// lengths of independent chains concatenated in the trace (empty: one chain).
inline EstimateWithError estimate_mean(std::span<const double> trace, std::span<const std::size_t> segments = {}) {
  if (trace.empty()) throw std::invalid_argument("estimate_mean: empty trace");
  const double m = mean_of(trace);
  if (trace.size() < 10) return {m, std::sqrt(variance_of(trace) / static_cast<double>(trace.size())),
                                 static_cast<double>(trace.size())};
  const double ess = segmented_ess(trace, segments);
  return {m, std::sqrt(variance_of(trace) / ess), ess};
}

template <typename F>
std::vector<double> map_trace(std::span<const double> trace, F&& f) {
  std::vector<double> out(trace.size());
  std::transform(trace.begin(), trace.end(), out.begin(), f);
  return out;
}

struct EnergyMoments {
  EstimateWithError mean_h;
  EstimateWithError a_n;
};

/// <h_N> and a_N = <(h_N - v)^2>.
inline EnergyMoments estimate_energy_moments(const ChainResult& result, double v) {
  if (result.energy_trace.empty()) throw std::invalid_argument("estimate_energy_moments: empty trace");
  const auto sq = map_trace(result.energy_trace, [v](double h) { return (h - v) * (h - v); });
  return {estimate_mean(result.energy_trace, result.segments), estimate_mean(sq, result.segments)};
}

/// Per-sweep eps_N from the recorded g_d, |g|^2 and h_N.
inline std::vector<double> epsilon_trace(const ChainResult& result, const ModelInstance& inst, std::size_t d,
                                         double v) {
  const auto& gd = result.coord_trace(d);
  std::vector<double> out(gd.size());
  for (std::size_t t = 0; t < gd.size(); ++t) {
    const double s = result.norm_sq_trace[t];
    out[t] = epsilon_from_summaries(inst.size(), inst.eigenvalue(d), v, gd[t], s, result.energy_trace[t] * s);
  }
  return out;
}

struct EpsilonEstimate {
  EstimateWithError gibbs;      // <|eps_N|>
  EstimateWithError decoupled;  // <|eps_N|>_d
};

inline EpsilonEstimate estimate_epsilon(const ChainResult& gibbs, const ChainResult& decoupled,
                                        const ModelInstance& inst, std::size_t d, double v) {
  auto abs_eps = [&](const ChainResult& r) {
    auto e = epsilon_trace(r, inst, d, v);
    for (auto& x : e) x = std::abs(x);
    return estimate_mean(e, r.segments);
  };
  return {abs_eps(gibbs), abs_eps(decoupled)};
}

struct ThermoResult {
  EstimateWithError f;  // f_N at the last grid point
  std::vector<double> grid;
  std::vector<EstimateWithError> mean_h;  // <h_N>_t per grid point
  std::vector<EstimateWithError> f_path;  // running integral per grid point
};

inline constexpr double kMaxThermoSpacing = 0.05;

/// Uniform grid 0 = t_0 < ... < t_m = theta with spacing <= `spacing`.
inline std::vector<double> thermo_grid(double theta, double spacing = kMaxThermoSpacing) {
  if (theta == 0.0) return {0.0};
  const auto m = static_cast<std::size_t>(std::ceil(std::abs(theta) / spacing - 1e-9));
  std::vector<double> grid(m + 1);
  for (std::size_t k = 0; k <= m; ++k) grid[k] = theta * static_cast<double>(k) / static_cast<double>(m);
  return grid;
}

/// f_N(theta) = int_0^theta <h_N>_t dt by the trapezoid rule. <h_N>_0 is the
/// exact mean eigenvalue; every other grid point runs cfg.n_chains chains.
/// Leg k uses seeds cfg.seed + k * cfg.n_chains + c.
inline ThermoResult thermo_integrate(const ModelInstance& inst, const TransformContext& ctx,
                                     std::span<const double> grid, const ChainConfig& cfg, std::size_t jobs = 1) {
  if (grid.empty() || grid.front() != 0.0) throw std::invalid_argument("thermo_integrate: grid must start at 0");
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double step = std::abs(grid[k] - grid[k - 1]);
    if (!(step > 0.0) || step > kMaxThermoSpacing + 1e-12)
      throw std::invalid_argument("thermo_integrate: grid spacing must lie in (0, 0.05]");
    if ((grid[k] - grid[k - 1]) * (grid.back() - grid.front()) < 0.0)
      throw std::invalid_argument("thermo_integrate: grid must be monotone");
    if (!ctx.check_high_temp(grid[k]))
      throw std::domain_error("thermo_integrate: grid point " + std::to_string(grid[k]) + " outside T_rho " +
                              ctx.region_text());
  }
  ThermoResult out;
  out.grid.assign(grid.begin(), grid.end());
  out.mean_h.push_back({inst.mean_eigenvalue(), 0.0, std::numeric_limits<double>::infinity()});
  auto legs = parallel_map(grid.size() - 1, jobs, [&](std::size_t j) {
    ChainConfig leg = cfg;
    leg.seed = cfg.seed + (j + 1) * cfg.n_chains;
    const auto r = run_gibbs(inst.with_theta(grid[j + 1]), leg, 1);
    return estimate_mean(r.energy_trace, r.segments);
  });
  out.mean_h.insert(out.mean_h.end(), legs.begin(), legs.end());

  double f = 0.0;
  double var = 0.0;
  std::vector<double> coef(grid.size(), 0.0);
  out.f_path.push_back({0.0, 0.0, 0.0});
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double h = grid[k] - grid[k - 1];
    f += 0.5 * h * (out.mean_h[k - 1].value + out.mean_h[k].value);
    coef[k - 1] += 0.5 * h;
    coef[k] += 0.5 * h;
    var = 0.0;
    for (std::size_t j = 0; j <= k; ++j) var += coef[j] * coef[j] * out.mean_h[j].std_error * out.mean_h[j].std_error;
    out.f_path.push_back({f, std::sqrt(var), 0.0});
  }
  out.f = out.f_path.back();
  return out;
}

/// Keep every ceil(len / ESS)-th sample of each segment.
inline std::vector<double> thin_to_ess(std::span<const double> trace, std::span<const std::size_t> segments) {
  std::vector<std::size_t> segs(segments.begin(), segments.end());
  if (segs.empty()) segs.push_back(trace.size());
  std::vector<double> out;
  std::size_t offset = 0;
  for (auto len : segs) {
    const auto part = trace.subspan(offset, len);
    const double ess = effective_sample_size(part);
    const auto stride = static_cast<std::size_t>(std::max(1.0, std::ceil(static_cast<double>(len) / ess)));
    for (std::size_t i = 0; i < len; i += stride) out.push_back(part[i]);
    offset += len;
  }
  return out;
}

struct KsResult {
  double ks_stat;
  double threshold;  // 1.63 / sqrt(ESS)
  double ess;        // size of the ESS-thinned sample
  bool pass;
};

/// KS test of the ESS-thinned trace against an arbitrary CDF.
template <typename Cdf>
KsResult ks_test(std::span<const double> trace, Cdf&& cdf, std::span<const std::size_t> segments = {}) {
  auto sample = thin_to_ess(trace, segments);
  const double ess = static_cast<double>(sample.size());
  if (ess < kMinTestEss)
    throw std::domain_error("trace too correlated: ESS = " + std::to_string(ess) + " < 200");
  const double d = ks_statistic(std::move(sample), cdf);
  const double threshold = kKsCritical / std::sqrt(ess);
  return {d, threshold, ess, d <= threshold};
}

/// KS test of a coordinate trace against N(0, sigma2).
inline KsResult marginal_test(std::span<const double> trace, double sigma2, std::span<const std::size_t> segments = {}) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("marginal_test: sigma2 must be positive");
  return ks_test(trace, [sigma2](double x) { return normal_cdf(x, sigma2); }, segments);
}

struct JointDecoupling {
  EstimateWithError correlation;  // Pearson, signed
  EstimateWithError product;      // <tanh x tanh y> - <tanh x><tanh y>, signed
  double max_abs_corr() const { return std::abs(correlation.value); }
};

inline JointDecoupling joint_decoupling_test(std::span<const double> x, std::span<const double> y,
                                             std::span<const std::size_t> segments = {}) {
  if (x.size() != y.size()) throw std::invalid_argument("joint_decoupling_test: traces differ in length");
  for (auto t : {x, y}) {
    const double ess = segmented_ess(t, segments);
    if (ess < kMinTestEss) throw std::domain_error("trace too correlated: ESS = " + std::to_string(ess) + " < 200");
  }
  // centered products; their mean is the covariance and their ESS sets the error
  auto covariance = [&](std::span<const double> a, std::span<const double> b) {
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    std::vector<double> p(a.size());
    for (std::size_t t = 0; t < a.size(); ++t) p[t] = (a[t] - ma) * (b[t] - mb);
    return estimate_mean(p, segments);
  };
  const double sx = std::sqrt(variance_of(x));
  const double sy = std::sqrt(variance_of(y));
  if (!(sx > 0.0 && sy > 0.0)) throw std::domain_error("joint_decoupling_test: constant trace");
  auto corr = covariance(x, y);
  corr.value /= sx * sy;
  corr.std_error /= sx * sy;

  auto tanh_of = [](std::span<const double> a) { return map_trace(a, [](double u) { return std::tanh(u); }); };
  const auto tx = tanh_of(x);
  const auto ty = tanh_of(y);
  return {corr, covariance(tx, ty)};
}

/// int rho(dgamma) E f(X_gamma), X_gamma ~ N(0, sigma^2_gamma), by Gauss-Hermite.
inline double sample_mean_limit(const TransformContext& ctx, double theta, const std::function<double(double)>& f,
                                std::size_t hermite_nodes = 64) {
  const auto rule = gauss_hermite(hermite_nodes);
  if (theta == 0.0) return gaussian_expectation(f, 1.0, rule);
  if (!ctx.check_high_temp(theta))
    throw std::domain_error("sample_mean_limit: theta outside T_rho " + ctx.region_text());
  const double v = ctx.v_of_theta(theta);
  return ctx.measure().integrate([&](double gamma) {
    const double var = 1.0 / (1.0 + 2.0 * theta * (v - gamma));
    return gaussian_expectation(f, var, rule);
  });
}

struct SampleMean {
  EstimateWithError mean;  // <F>
  double variance;         // Gibbs variance of F
};

inline SampleMean empirical_sample_mean(const ChainResult& result, SampleFunction f) {
  auto it = result.sample_mean_traces.find(f);
  if (it == result.sample_mean_traces.end())
    throw std::invalid_argument("empirical_sample_mean: sample function '" + to_string(f) + "' was not recorded");
  return {estimate_mean(it->second, result.segments), variance_of(it->second)};
}

/// <g_d^{2n}> from a coordinate trace.
inline EstimateWithError moment_check(std::span<const double> trace, unsigned n,
                                      std::span<const std::size_t> segments = {}) {
  if (n == 0) throw std::invalid_argument("moment_check: n must be positive");
  const double ess = segmented_ess(trace, segments);
  if (ess < kMinTestEss) throw std::domain_error("trace too correlated: ESS = " + std::to_string(ess) + " < 200");
  const auto pw = map_trace(trace, [n](double x) { return std::pow(x * x, static_cast<double>(n)); });
  return estimate_mean(pw, segments);
}

inline constexpr double kVarianceRegimeConstant = 9.0 + 4.123105625617660549821409855974;  // 9 + sqrt(17)

/// 2 (9 + sqrt 17) gamma_max |theta| < 1.
inline bool variance_regime(double gamma_max, double theta) {
  return 2.0 * kVarianceRegimeConstant * gamma_max * std::abs(theta) < 1.0;
}

/// Least-squares slope of y against x.
inline double ls_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("ls_slope: need >= 2 paired points");
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

struct VarianceScaling {
  double slope;
  std::vector<std::size_t> sizes;
  std::vector<double> variances;  // Gibbs variance of F per size
  std::vector<EstimateWithError> means;
};

/// Gibbs variance of F = N^-1 sum f(g_i) over `sizes`, and the slope of
/// log Var(F) against log N. Leg j uses seeds cfg.seed + j * cfg.n_chains + c.
inline VarianceScaling variance_scaling_experiment(const TransformContext& ctx, double theta, SampleFunction f,
                                                   std::span<const std::size_t> sizes, const ChainConfig& cfg,
                                                   std::size_t jobs = 1) {
  if (!variance_regime(ctx.gamma_max(), theta))
    throw std::domain_error("variance_scaling_experiment: 2(9+sqrt17) gamma_max |theta| >= 1");
  auto legs = parallel_map(sizes.size(), jobs, [&](std::size_t j) {
    ChainConfig leg = cfg;
    leg.seed = cfg.seed + j * cfg.n_chains;
    leg.sample_functions = {f};
    const auto inst = ModelInstance::from_context(ctx, sizes[j], theta);
    return empirical_sample_mean(run_gibbs(inst, leg, 1), f);
  });
  VarianceScaling out;
  out.sizes.assign(sizes.begin(), sizes.end());
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    out.variances.push_back(legs[j].variance);
    out.means.push_back(legs[j].mean);
    lx.push_back(std::log(static_cast<double>(sizes[j])));
    ly.push_back(std::log(legs[j].variance));
  }
  out.slope = ls_slope(lx, ly);
  return out;
}

}  // namespace ssg
