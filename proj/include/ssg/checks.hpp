#pragma once

// Named verification checks shared by the CLI `verify` subcommand and the
// acceptance binary. Each check runs its own chain legs and reports rows of
// (check_name, N, theta, value, std_error, reference, pass). Rows whose
// reference is NaN are informational and always pass.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssg/estimators.hpp"
#include "ssg/parallel.hpp"
#include "ssg/sampler.hpp"
#include "ssg/stats.hpp"
#include "ssg/transforms.hpp"

namespace ssg {

struct CheckRow {
  std::string check;
  std::size_t n = 0;
  double theta = 0.0;
  double value = 0.0;
  double std_error = std::numeric_limits<double>::quiet_NaN();
  double reference = std::numeric_limits<double>::quiet_NaN();
  bool pass = true;
};

struct CheckResult {
  std::string name;
  bool pass = true;
  std::string message;  // names the failing rows and their numbers
  std::vector<CheckRow> rows;
};

/// Everything a check needs. `tracked` empty means "auto": argmin and argmax of gamma.
struct Experiment {
  const TransformContext* ctx = nullptr;
  double theta = 0.0;
  std::vector<std::size_t> sizes;
  ChainConfig chain;
  std::vector<std::size_t> tracked;
  SampleFunction function = SampleFunction::tanh;
  std::size_t jobs = 1;
};

inline const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names{"energy_concentration", "epsilon",       "free_energy",
                                              "marginals",            "joint_decoupling", "norm_law",
                                              "sample_means",         "variance_scaling", "moments",
                                              "high_temp"};
  return names;
}

namespace detail {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Seed block per check so that checks in one run draw disjoint streams.
inline std::uint64_t check_seed(const Experiment& e, const std::string& name) {
  const auto& names = check_names();
  const auto idx = static_cast<std::uint64_t>(std::find(names.begin(), names.end(), name) - names.begin());
  return e.chain.seed + 1000003ULL * (idx + 1);
}

inline std::vector<std::size_t> tracked_for(const Experiment& e, std::size_t n) {
  if (!e.tracked.empty()) {
    for (auto d : e.tracked)
      if (d >= n) throw std::invalid_argument("tracked coordinate " + std::to_string(d) + " out of range for N = " +
                                              std::to_string(n));
    return e.tracked;
  }
  if (n == 1) return {0};
  return {0, n - 1};
}

inline void require_sizes(const Experiment& e, std::size_t at_least, const std::string& name) {
  if (e.sizes.size() < at_least)
    throw std::invalid_argument(name + " needs at least " + std::to_string(at_least) + " values in N_list");
}

inline void require_high_temp(const Experiment& e, const std::string& name) {
  if (!e.ctx->check_high_temp(e.theta))
    throw std::domain_error(name + ": theta = " + std::to_string(e.theta) + " is outside T_rho " +
                            e.ctx->region_text());
}

// Leg j of a check: chain seeds base + j * n_chains + c.
inline ChainConfig leg_config(const Experiment& e, std::uint64_t base, std::size_t j,
                              std::vector<std::size_t> tracked = {}) {
  ChainConfig cfg = e.chain;
  cfg.seed = base + j * cfg.n_chains;
  cfg.tracked_coords = std::move(tracked);
  return cfg;
}

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline CheckResult finish(std::string name, std::vector<CheckRow> rows) {
  CheckResult out{std::move(name), true, {}, std::move(rows)};
  for (const auto& r : out.rows) {
    if (r.pass) continue;
    out.pass = false;
    if (!out.message.empty()) out.message += "; ";
    out.message += r.check + " at N=" + std::to_string(r.n) + ": value " + num(r.value) + " vs reference " +
                   num(r.reference) + " (std_error " + num(r.std_error) + ")";
  }
  return out;
}

}  // namespace detail

/// a_N = <(h_N - v)^2> must strictly decrease along N_list.
inline CheckResult check_energy_concentration(const Experiment& e) {
  const std::string name = "energy_concentration";
  detail::require_high_temp(e, name);
  detail::require_sizes(e, 2, name);
  const double v = e.ctx->v_of_theta(e.theta);
  const auto base = detail::check_seed(e, name);
  auto moments = parallel_map(e.sizes.size(), e.jobs, [&](std::size_t j) {
    const auto inst = ModelInstance::from_context(*e.ctx, e.sizes[j], e.theta);
    return estimate_energy_moments(run_gibbs(inst, detail::leg_config(e, base, j)), v);
  });
  std::vector<CheckRow> rows;
  for (std::size_t j = 0; j < e.sizes.size(); ++j) {
    rows.push_back({name + ".mean_h", e.sizes[j], e.theta, moments[j].mean_h.value, moments[j].mean_h.std_error,
                    detail::kNaN, true});
    const double prev = j == 0 ? detail::kNaN : moments[j - 1].a_n.value;
    rows.push_back({name + ".a_N", e.sizes[j], e.theta, moments[j].a_n.value, moments[j].a_n.std_error, prev,
                    j == 0 || moments[j].a_n.value < prev});
  }
  return detail::finish(name, std::move(rows));
}

/// <|eps_N|> / (N^-1/2 + sqrt a_N) at the top coordinate: max/min over N_list
/// must be <= 2, and a_N must strictly decrease.
inline CheckResult check_epsilon(const Experiment& e) {
  const std::string name = "epsilon";
  detail::require_high_temp(e, name);
  detail::require_sizes(e, 2, name);
  const double v = e.ctx->v_of_theta(e.theta);
  const auto base = detail::check_seed(e, name);
  struct Leg {
    EpsilonEstimate eps;
    EnergyMoments moments;
  };
  auto legs = parallel_map(e.sizes.size(), e.jobs, [&](std::size_t j) {
    const std::size_t n = e.sizes[j];
    const auto inst = ModelInstance::from_context(*e.ctx, n, e.theta);
    const std::size_t d = detail::tracked_for(e, n).back();
    const auto gibbs = run_gibbs(inst, detail::leg_config(e, base, j, {d}));
    const auto dec = run_decoupled(inst, d, v, detail::leg_config(e, base + 500009ULL, j, {d}));
    return Leg{estimate_epsilon(gibbs, dec, inst, d, v), estimate_energy_moments(gibbs, v)};
  });
  std::vector<CheckRow> rows;
  std::vector<double> ratios;
  for (std::size_t j = 0; j < legs.size(); ++j) {
    const auto n = e.sizes[j];
    const double denom = 1.0 / std::sqrt(static_cast<double>(n)) + std::sqrt(std::max(0.0, legs[j].moments.a_n.value));
    ratios.push_back(legs[j].eps.gibbs.value / denom);
    rows.push_back({name + ".mean_abs", n, e.theta, legs[j].eps.gibbs.value, legs[j].eps.gibbs.std_error,
                    detail::kNaN, true});
    rows.push_back({name + ".mean_abs_decoupled", n, e.theta, legs[j].eps.decoupled.value,
                    legs[j].eps.decoupled.std_error, detail::kNaN, true});
    rows.push_back({name + ".ratio", n, e.theta, ratios.back(), legs[j].eps.gibbs.std_error / denom, detail::kNaN,
                    true});
    const double prev = j == 0 ? detail::kNaN : legs[j - 1].moments.a_n.value;
    rows.push_back({name + ".a_N", n, e.theta, legs[j].moments.a_n.value, legs[j].moments.a_n.std_error, prev,
                    j == 0 || legs[j].moments.a_n.value < prev});
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  const double spread = *hi / *lo;
  rows.push_back({name + ".ratio_spread", e.sizes.back(), e.theta, spread, detail::kNaN, 2.0, spread <= 2.0});
  return detail::finish(name, std::move(rows));
}

/// Thermodynamic integration against the limit, within 3 (error + 0.5/N).
inline CheckResult check_free_energy(const Experiment& e) {
  const std::string name = "free_energy";
  detail::require_high_temp(e, name);
  detail::require_sizes(e, 1, name);
  const double limit = e.ctx->free_energy_limit(e.theta);
  const auto grid = thermo_grid(e.theta);
  std::vector<CheckRow> rows;
  const auto base = detail::check_seed(e, name);
  for (std::size_t j = 0; j < e.sizes.size(); ++j) {
    const auto n = e.sizes[j];
    const auto inst = ModelInstance::from_context(*e.ctx, n, e.theta);
    // each size gets a block of seeds wide enough for every grid leg
    const auto cfg = detail::leg_config(e, base, j * grid.size());
    const auto res = thermo_integrate(inst, *e.ctx, grid, cfg, e.jobs);
    const double tol = 3.0 * (res.f.std_error + 0.5 / static_cast<double>(n));
    rows.push_back({name, n, e.theta, res.f.value, res.f.std_error, limit, std::abs(res.f.value - limit) <= tol});
  }
  return detail::finish(name, std::move(rows));
}

/// KS test of each tracked coordinate against N(0, sigma^2_gamma).
inline CheckResult check_marginals(const Experiment& e) {
  const std::string name = "marginals";
  detail::require_high_temp(e, name);
  detail::require_sizes(e, 1, name);
  const auto base = detail::check_seed(e, name);
  auto legs = parallel_map(e.sizes.size(), e.jobs, [&](std::size_t j) {
    const auto n = e.sizes[j];
    const auto inst = ModelInstance::from_context(*e.ctx, n, e.theta);
    const auto coords = detail::tracked_for(e, n);
    const auto res = run_gibbs(inst, detail::leg_config(e, base, j, coords));
    std::vector<CheckRow> rows;
    for (auto d : coords) {
      const auto ks = marginal_test(res.coord_trace(d), e.ctx->sigma2(e.theta, inst.eigenvalue(d)), res.segments);
      rows.push_back({name + ".ks_g" + std::to_string(d), n, e.theta, ks.ks_stat, detail::kNaN, ks.threshold, ks.pass});
    }
    return rows;
  });
  std::vector<CheckRow> rows;
  for (auto& l : legs) rows.insert(rows.end(), l.begin(), l.end());
  return detail::finish(name, std::move(rows));
}

/// Correlation and tanh-product covariance of the first two tracked
/// coordinates: within 3 standard errors of 0, and |corr| shrinking from the
/// first to the last size.
inline CheckResult check_joint_decoupling(const Experiment& e) {
  const std::string name = "joint_decoupling";
  detail::require_high_temp(e, name);
  detail::require_sizes(e, 2, name);
  const auto base = detail::check_seed(e, name);
  auto legs = parallel_map(e.sizes.size(), e.jobs, [&](std::size_t j) {
    const auto n = e.sizes[j];
    const auto coords = detail::tracked_for(e, n);
    if (coords.size() < 2) throw std::invalid_argument("joint_decoupling needs two tracked coordinates");
    const auto inst = ModelInstance::from_context(*e.ctx, n, e.theta);
    const auto res = run_gibbs(inst, detail::leg_config(e, base, j, {coords[0], coords[1]}));
    return joint_decoupling_test(res.coord_trace(coords[0]), res.coord_trace(coords[1]), res.segments);
  });
  std::vector<CheckRow> rows;
  for (std::size_t j = 0; j < legs.size(); ++j) {
    const auto& c = legs[j].correlation;
    const auto& p = legs[j].product;
    rows.push_back({name + ".corr", e.sizes[j], e.theta, c.value, c.std_error, 0.0,
                    std::abs(c.value) <= 3.0 * c.std_error});
    rows.push_back({name + ".tanh_product", e.sizes[j], e.theta, p.value, p.std_error, 0.0,
                    std::abs(p.value) <= 3.0 * p.std_error});
  }
  const double first = std::abs(legs.front().correlation.value);
  const double last = std::abs(legs.back().correlation.value);
  rows.push_back({name + ".corr_shrinks", e.sizes.back(), e.theta, last, legs.back().correlation.std_error, first,
                  last < first});
  return detail::finish(name, std::move(rows));
}

/// At theta = 0: KS of |g|^2 against chi^2_N, and K = N Var(N/|g|^2) < 10.
inline CheckResult check_norm_law(const Experiment& e) {
  const std::string name = "norm_law";
  detail::require_sizes(e, 1, name);
  const auto base = detail::check_seed(e, name);
  auto legs = parallel_map(e.sizes.size(), e.jobs, [&](std::size_t j) {
    const auto n = e.sizes[j];
    const auto inst = ModelInstance::from_context(*e.ctx, n, 0.0);
    const auto res = run_gibbs(inst, detail::leg_config(e, base, j));
    const double dof = static_cast<double>(n);
    const auto ks = ks_test(res.norm_sq_trace, [dof](double x) { return chi2_cdf(x, dof); }, res.segments);
    const auto inv = map_trace(res.norm_sq_trace, [dof](double s) { return dof / s; });
    const double k = dof * variance_of(inv);
    std::vector<CheckRow> rows;
    rows.push_back({name + ".ks_chi2", n, 0.0, ks.ks_stat, detail::kNaN, ks.threshold, ks.pass});
    rows.push_back({name + ".K", n, 0.0, k, detail::kNaN, 10.0, k < 10.0});
    return rows;
  });
  std::vector<CheckRow> rows;
  for (auto& l : legs) rows.insert(rows.end(), l.begin(), l.end());
  return detail::finish(name, std::move(rows));
}

/// |<F> - limit| for F = N^-1 sum f(g_i): decreasing along N_list and <= 0.02
/// at the largest N. Also reports the x^2 limit against int rho sigma^2.
inline CheckResult check_sample_means(const Experiment& e) {
  const std::string name = "sample_means";
  detail::require_high_temp(e, name);
  detail::require_sizes(e, 2, name);
  const auto f = e.function;
  const double limit = sample_mean_limit(*e.ctx, e.theta, [f](double x) { return apply(f, x); });
  const auto base = detail::check_seed(e, name);
  auto legs = parallel_map(e.sizes.size(), e.jobs, [&](std::size_t j) {
    ChainConfig cfg = detail::leg_config(e, base, j);
    cfg.sample_functions = {f};
    const auto inst = ModelInstance::from_context(*e.ctx, e.sizes[j], e.theta);
    return empirical_sample_mean(run_gibbs(inst, cfg), f).mean;
  });
  std::vector<CheckRow> rows;
  double prev = detail::kNaN;
  for (std::size_t j = 0; j < legs.size(); ++j) {
    const double dev = std::abs(legs[j].value - limit);
    rows.push_back({name + ".mean", e.sizes[j], e.theta, legs[j].value, legs[j].std_error, limit, true});
    rows.push_back({name + ".abs_error", e.sizes[j], e.theta, dev, legs[j].std_error, prev, j == 0 || dev < prev});
    prev = dev;
  }
  rows.push_back({name + ".final_error", e.sizes.back(), e.theta, prev, legs.back().std_error, 0.02, prev <= 0.02});
  const double square = sample_mean_limit(*e.ctx, e.theta, [](double x) { return x * x; });
  const double var_mass =
      e.ctx->measure().integrate([&](double gamma) { return e.ctx->sigma2(e.theta, gamma); });
  rows.push_back({name + ".square_limit", 0, e.theta, square, detail::kNaN, var_mass,
                  std::abs(square - var_mass) <= 1e-9});
  return detail::finish(name, std::move(rows));
}

/// Slope of log Var(F) against log N: <= -2/3 at theta (which must satisfy
/// the variance regime) and -1 +- 0.15 on a theta = 0 calibration leg.
inline CheckResult check_variance_scaling(const Experiment& e) {
  const std::string name = "variance_scaling";
  detail::require_sizes(e, 2, name);
  if (!variance_regime(e.ctx->gamma_max(), e.theta))
    throw std::domain_error("variance_scaling: theta = " + std::to_string(e.theta) +
                            " violates 2(9+sqrt17) gamma_max |theta| < 1");
  const auto base = detail::check_seed(e, name);
  ChainConfig cfg = e.chain;
  cfg.seed = base;
  const auto at_theta = variance_scaling_experiment(*e.ctx, e.theta, e.function, e.sizes, cfg, e.jobs);
  cfg.seed = base + 500009ULL;
  const auto at_zero = variance_scaling_experiment(*e.ctx, 0.0, e.function, e.sizes, cfg, e.jobs);
  std::vector<CheckRow> rows;
  for (std::size_t j = 0; j < e.sizes.size(); ++j) {
    rows.push_back({name + ".variance", e.sizes[j], e.theta, at_theta.variances[j], detail::kNaN, detail::kNaN, true});
    rows.push_back({name + ".variance_calibration", e.sizes[j], 0.0, at_zero.variances[j], detail::kNaN, detail::kNaN,
                    true});
  }
  rows.push_back({name + ".slope", e.sizes.back(), e.theta, at_theta.slope, detail::kNaN, -0.66,
                  at_theta.slope <= -0.66});
  rows.push_back({name + ".calibration_slope", e.sizes.back(), 0.0, at_zero.slope, detail::kNaN, -1.0,
                  std::abs(at_zero.slope + 1.0) <= 0.15});
  return detail::finish(name, std::move(rows));
}

/// <g_d^2> and <g_d^4> of the tracked coordinates: no growth from the first to
/// the last size beyond 3 combined standard errors.
inline CheckResult check_moments(const Experiment& e) {
  const std::string name = "moments";
  detail::require_high_temp(e, name);
  detail::require_sizes(e, 2, name);
  const auto base = detail::check_seed(e, name);
  struct Moment {
    std::string label;
    EstimateWithError est;
  };
  auto legs = parallel_map(e.sizes.size(), e.jobs, [&](std::size_t j) {
    const auto n = e.sizes[j];
    const auto coords = detail::tracked_for(e, n);
    const auto inst = ModelInstance::from_context(*e.ctx, n, e.theta);
    const auto res = run_gibbs(inst, detail::leg_config(e, base, j, coords));
    std::vector<Moment> out;
    for (std::size_t k = 0; k < coords.size(); ++k)
      for (unsigned p : {1U, 2U})
        out.push_back({"coord" + std::to_string(k) + ".power" + std::to_string(2 * p),
                       moment_check(res.coord_trace(coords[k]), p, res.segments)});
    return out;
  });
  std::vector<CheckRow> rows;
  for (std::size_t j = 0; j < legs.size(); ++j)
    for (const auto& m : legs[j])
      rows.push_back({name + "." + m.label, e.sizes[j], e.theta, m.est.value, m.est.std_error, detail::kNaN, true});
  for (std::size_t k = 0; k < legs.front().size(); ++k) {
    const auto& a = legs.front()[k].est;
    const auto& b = legs.back()[k].est;
    const double bound = a.value + 3.0 * std::hypot(a.std_error, b.std_error);
    rows.push_back({name + "." + legs.front()[k].label + ".no_growth", e.sizes.back(), e.theta, b.value, b.std_error,
                    bound, b.value <= bound});
  }
  return detail::finish(name, std::move(rows));
}

/// Membership in T_rho against the margin condition on a symmetric theta grid.
inline CheckResult check_high_temp_region(const Experiment& e) {
  const std::string name = "high_temp";
  const double span = std::max(std::abs(e.theta), 0.05);
  std::vector<CheckRow> rows;
  for (int i = -20; i <= 20; ++i) {
    if (i == 0) continue;
    const double theta = span * static_cast<double>(i) / 10.0;
    const bool inside = e.ctx->in_high_temp_region(theta);
    if (!inside) {
      rows.push_back({name + ".outside", 0, theta, detail::kNaN, detail::kNaN, detail::kNaN, true});
      continue;
    }
    const double margin = e.ctx->high_temp_margin(theta);
    rows.push_back({name + ".margin", 0, theta, margin, detail::kNaN, 1.0, margin < 1.0 + 1e-9});
  }
  return detail::finish(name, std::move(rows));
}

inline CheckResult run_check(const std::string& name, const Experiment& e) {
  if (e.ctx == nullptr) throw std::invalid_argument("run_check: no transform context");
  if (name == "energy_concentration") return check_energy_concentration(e);
  if (name == "epsilon") return check_epsilon(e);
  if (name == "free_energy") return check_free_energy(e);
  if (name == "marginals") return check_marginals(e);
  if (name == "joint_decoupling") return check_joint_decoupling(e);
  if (name == "norm_law") return check_norm_law(e);
  if (name == "sample_means") return check_sample_means(e);
  if (name == "variance_scaling") return check_variance_scaling(e);
  if (name == "moments") return check_moments(e);
  if (name == "high_temp") return check_high_temp_region(e);
  throw std::invalid_argument("unknown check '" + name + "'");
}

}  // namespace ssg
