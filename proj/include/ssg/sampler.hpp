#pragma once

// Single-site random-walk Metropolis for the Gibbs measure
//   d<.> ~ exp(theta H_N(g)) dG(g),  G = standard normal on R^N,
// and for the decoupled measure <.>_d in which coordinate d is an exact
// N(0, 1 / (1 + 2 theta (v - gamma_d))) draw.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssg/model.hpp"
#include "ssg/parallel.hpp"
#include "ssg/stats.hpp"

namespace ssg {

/// Coordinate functions f whose sample mean F(g) = N^-1 sum_i f(g_i) a chain
/// can record per retained sweep.
enum class SampleFunction { zero, identity, square, tanh };

inline double apply(SampleFunction f, double x) {
  switch (f) {
    case SampleFunction::zero: return 0.0;
    case SampleFunction::identity: return x;
    case SampleFunction::square: return x * x;
    case SampleFunction::tanh: return std::tanh(x);
  }
  return 0.0;
}

inline std::string to_string(SampleFunction f) {
  switch (f) {
    case SampleFunction::zero: return "zero";
    case SampleFunction::identity: return "identity";
    case SampleFunction::square: return "square";
    case SampleFunction::tanh: return "tanh";
  }
  return "?";
}

inline SampleFunction parse_sample_function(const std::string& name) {
  if (name == "zero") return SampleFunction::zero;
  if (name == "identity") return SampleFunction::identity;
  if (name == "square") return SampleFunction::square;
  if (name == "tanh") return SampleFunction::tanh;
  throw std::invalid_argument("unknown sample function '" + name + "'");
}

struct ChainConfig {
  std::size_t n_sweeps = 22000;  // including burn-in
  std::size_t burn_in_sweeps = 2000;
  std::size_t thin = 1;
  double step_size = 1.0;
  bool adapt = true;
  std::uint64_t seed = 0;
  std::vector<std::size_t> tracked_coords;
  std::size_t n_chains = 1;
  bool store_states = false;
  std::vector<SampleFunction> sample_functions;

  std::size_t retained() const { return (n_sweeps - burn_in_sweeps) / thin; }

  void validate(std::size_t n) const {
    if (n_sweeps == 0) throw std::invalid_argument("n_sweeps must be positive");
    if (burn_in_sweeps == 0) throw std::invalid_argument("burn_in_sweeps must be positive");
    if (burn_in_sweeps >= n_sweeps) throw std::invalid_argument("burn_in_sweeps must be < n_sweeps");
    if (thin == 0) throw std::invalid_argument("thin must be >= 1");
    if (!(step_size > 0.0) || !std::isfinite(step_size)) throw std::invalid_argument("step_size must be positive");
    if (n_chains == 0) throw std::invalid_argument("n_chains must be positive");
    for (auto i : tracked_coords)
      if (i >= n) throw std::invalid_argument("tracked coordinate " + std::to_string(i) + " out of range");
  }
};

struct ChainResult {
  std::size_t n = 0;
  double theta = 0.0;
  std::vector<double> energy_trace;  // h_N per retained sweep
  std::vector<double> norm_sq_trace;
  std::map<std::size_t, std::vector<double>> coord_traces;
  std::map<SampleFunction, std::vector<double>> sample_mean_traces;
  std::vector<std::vector<double>> states;  // only with store_states
  double acceptance_rate = 0.0;
  double final_step_size = 0.0;
  double ess_energy = std::numeric_limits<double>::quiet_NaN();
  double rhat_energy = std::numeric_limits<double>::quiet_NaN();
  // lengths of the independent chains concatenated in the traces
  std::vector<std::size_t> segments;

  std::size_t length() const { return energy_trace.size(); }

  const std::vector<double>& coord_trace(std::size_t d) const {
    auto it = coord_traces.find(d);
    if (it == coord_traces.end())
      throw std::invalid_argument("coordinate " + std::to_string(d) + " was not tracked (missing per-sweep fields)");
    return it->second;
  }
};

/// log of the unnormalized Gibbs density: theta H_N(g) - |g|^2 / 2.
inline double log_target(const ModelInstance& inst, const SpinState& state) {
  return inst.theta() * hamiltonian(inst, state) - 0.5 * state.norm_sq();
}

/// Metropolis log-ratio for moving one coordinate from `old_value` to
/// `new_value`, given the current sums E = sum gamma_i g_i^2 and S = |g|^2.
inline double metropolis_log_ratio(double theta_n, double energy_num, double norm_sq, double gamma_i,
                                   double old_value, double new_value) {
  const double delta = new_value * new_value - old_value * old_value;
  const double new_norm = norm_sq + delta;
  const double new_energy = energy_num + gamma_i * delta;
  return theta_n * (new_energy / new_norm - energy_num / norm_sq) - 0.5 * delta;
}

/// log min(1, pi(g') / pi(g)) for the single-site move g_i -> new_value.
inline double log_acceptance(const ModelInstance& inst, const SpinState& state, std::size_t i, double new_value) {
  const double r = metropolis_log_ratio(inst.theta() * static_cast<double>(inst.size()), state.energy_num(),
                                        state.norm_sq(), inst.eigenvalue(i), state[i], new_value);
  return std::min(0.0, r);
}

/// Mean of a trace with an ESS-adjusted standard error; ESS is summed over
/// the independent segments.
inline double segmented_ess(std::span<const double> trace, std::span<const std::size_t> segments) {
  if (segments.size() <= 1) return effective_sample_size(trace);
  double total = 0.0;
  std::size_t offset = 0;
  for (auto len : segments) {
    total += effective_sample_size(trace.subspan(offset, len));
    offset += len;
  }
  return total;
}

namespace detail {

constexpr double kTargetAcceptance = 0.44;

// Shared kernel. With `decoupled`, coordinate `skip` is redrawn exactly at
// the start of every sweep from N(0, skip_variance) and excluded from the
// Metropolis energy.
inline ChainResult run_chain(const ModelInstance& inst, const ChainConfig& cfg, std::size_t chain_index,
                             bool decoupled, std::size_t skip, double skip_variance) {
  const std::size_t n = inst.size();
  cfg.validate(n);
  std::mt19937_64 rng;
  {
    const std::uint64_t s = cfg.seed + chain_index;
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
    rng.seed(seq);
  }
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;

  std::vector<double> g(n);
  for (auto& x : g) x = normal(rng);
  SpinState state(inst, std::move(g));

  const double theta_n = inst.theta() * static_cast<double>(n);
  const double skip_sd = std::sqrt(skip_variance);
  double log_step = std::log(cfg.step_size);

  ChainResult out;
  out.n = n;
  out.theta = inst.theta();
  const std::size_t keep = cfg.retained();
  out.energy_trace.reserve(keep);
  out.norm_sq_trace.reserve(keep);
  for (auto d : cfg.tracked_coords) out.coord_traces[d].reserve(keep);
  for (auto f : cfg.sample_functions) out.sample_mean_traces[f].reserve(keep);

  std::size_t accepted_total = 0;
  std::size_t proposed_total = 0;
  for (std::size_t sweep = 0; sweep < cfg.n_sweeps; ++sweep) {
    const bool burn_in = sweep < cfg.burn_in_sweeps;
    double off_norm = 0.0;
    double off_energy = 0.0;
    if (decoupled) {
      state.set(skip, skip_sd * normal(rng));
      off_norm = state[skip] * state[skip];
      off_energy = inst.eigenvalue(skip) * off_norm;
    }
    const double step = std::exp(log_step);
    std::size_t accepted = 0;
    std::size_t proposed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (decoupled && i == skip) continue;
      const double old_value = state[i];
      const double new_value = old_value + step * normal(rng);
      const double r = metropolis_log_ratio(theta_n, state.energy_num() - off_energy, state.norm_sq() - off_norm,
                                            inst.eigenvalue(i), old_value, new_value);
      ++proposed;
      if (r >= 0.0 || std::log(1.0 - uniform(rng)) < r) {
        state.set(i, new_value);
        ++accepted;
      }
    }

    if (burn_in) {
      if (cfg.adapt && proposed > 0) {
        // Robbins-Monro on log(step); frozen once burn-in ends
        const double gain = std::pow(static_cast<double>(sweep) + 1.0, -0.6);
        log_step += gain * (static_cast<double>(accepted) / static_cast<double>(proposed) - kTargetAcceptance);
      }
      continue;
    }
    accepted_total += accepted;
    proposed_total += proposed;
    if ((sweep - cfg.burn_in_sweeps + 1) % cfg.thin != 0) continue;

    out.energy_trace.push_back(state.energy_num() / state.norm_sq());
    out.norm_sq_trace.push_back(state.norm_sq());
    for (auto& [d, trace] : out.coord_traces) trace.push_back(state[d]);
    for (auto& [f, trace] : out.sample_mean_traces) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += apply(f, state[i]);
      trace.push_back(acc / static_cast<double>(n));
    }
    if (cfg.store_states) out.states.emplace_back(state.values().begin(), state.values().end());
  }

  out.acceptance_rate =
      proposed_total > 0 ? static_cast<double>(accepted_total) / static_cast<double>(proposed_total) : 0.0;
  out.final_step_size = std::exp(log_step);
  out.segments = {out.energy_trace.size()};
  if (out.energy_trace.size() >= 10) out.ess_energy = effective_sample_size(out.energy_trace);
  return out;
}

}  // namespace detail

/// One Gibbs chain; its RNG stream is seeded from cfg.seed + chain_index.
inline ChainResult gibbs_chain(const ModelInstance& inst, const ChainConfig& cfg, std::size_t chain_index = 0) {
  return detail::run_chain(inst, cfg, chain_index, false, 0, 1.0);
}

/// One chain of the decoupled measure <.>_d at the given v.
inline ChainResult decoupled_chain(const ModelInstance& inst, std::size_t d, double v, const ChainConfig& cfg,
                                   std::size_t chain_index = 0) {
  if (inst.size() < 2) throw std::invalid_argument("decoupled_chain needs N >= 2");
  if (d >= inst.size()) throw std::out_of_range("decoupled coordinate out of range");
  const double denom = 1.0 + 2.0 * inst.theta() * (v - inst.eigenvalue(d));
  if (!(denom > 0.0)) throw std::domain_error("decoupled_chain: 1 + 2 theta (v - gamma_d) must be positive");
  return detail::run_chain(inst, cfg, chain_index, true, d, 1.0 / denom);
}

/// (ESS, R-hat) of the energy traces. R-hat is NaN for a single chain.
struct Diagnostics {
  double ess;
  double rhat;
};

inline Diagnostics diagnostics(std::span<const ChainResult> results) {
  if (results.empty()) throw std::invalid_argument("diagnostics: no chains");
  double ess = 0.0;
  std::vector<std::vector<double>> traces;
  for (const auto& r : results) {
    ess += effective_sample_size(r.energy_trace);
    traces.push_back(r.energy_trace);
  }
  const double rhat = results.size() >= 2 ? gelman_rubin(traces) : std::numeric_limits<double>::quiet_NaN();
  return {ess, rhat};
}

/// Concatenate independent chains into one result; segment lengths are kept
/// so that ESS is computed per chain.
inline ChainResult pool(std::span<const ChainResult> results) {
  if (results.empty()) throw std::invalid_argument("pool: no chains");
  if (results.size() == 1) return results.front();
  ChainResult out;
  out.n = results.front().n;
  out.theta = results.front().theta;
  double accept = 0.0;
  for (const auto& r : results) {
    auto append = [](std::vector<double>& dst, const std::vector<double>& src) {
      dst.insert(dst.end(), src.begin(), src.end());
    };
    append(out.energy_trace, r.energy_trace);
    append(out.norm_sq_trace, r.norm_sq_trace);
    for (const auto& [d, t] : r.coord_traces) append(out.coord_traces[d], t);
    for (const auto& [f, t] : r.sample_mean_traces) append(out.sample_mean_traces[f], t);
    out.states.insert(out.states.end(), r.states.begin(), r.states.end());
    accept += r.acceptance_rate;
    out.segments.push_back(r.energy_trace.size());
  }
  out.acceptance_rate = accept / static_cast<double>(results.size());
  out.final_step_size = results.front().final_step_size;
  const auto diag = diagnostics(results);
  out.ess_energy = diag.ess;
  out.rhat_energy = diag.rhat;
  return out;
}

/// cfg.n_chains independent Gibbs chains on up to `jobs` threads, pooled.
inline ChainResult run_gibbs(const ModelInstance& inst, const ChainConfig& cfg, std::size_t jobs = 1) {
  auto chains = parallel_map(cfg.n_chains, jobs, [&](std::size_t c) { return gibbs_chain(inst, cfg, c); });
  return pool(chains);
}

inline ChainResult run_decoupled(const ModelInstance& inst, std::size_t d, double v, const ChainConfig& cfg,
                                 std::size_t jobs = 1) {
  auto chains = parallel_map(cfg.n_chains, jobs, [&](std::size_t c) { return decoupled_chain(inst, d, v, cfg, c); });
  return pool(chains);
}

}  // namespace ssg
