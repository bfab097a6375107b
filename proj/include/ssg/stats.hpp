#pragma once

// Small statistics toolbox: Kolmogorov-Smirnov distance against a reference
// CDF, the reference CDFs used here, and effective-sample-size / R-hat
// diagnostics for MCMC traces.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

namespace ssg {

inline double normal_cdf(double x, double variance = 1.0) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0 * variance));
}

/// CDF of the chi-square law with `dof` degrees of freedom.
inline double chi2_cdf(double x, double dof) {
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(0.5 * dof, 0.5 * x);
}

/// sup_x |F_n(x) - F(x)| for the empirical CDF F_n of `sample`.
template <typename Cdf>
double ks_statistic(std::vector<double> sample, Cdf&& cdf) {
  if (sample.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    const double di = static_cast<double>(i);
    d = std::max({d, (di + 1.0) / n - f, f - di / n});
  }
  return d;
}

inline double mean_of(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("mean of empty trace");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Unbiased sample variance (0 for a single value).
inline double variance_of(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  double acc = 0.0;
  for (double v : x) acc += (v - m) * (v - m);
  return acc / static_cast<double>(x.size() - 1);
}

/// Effective sample size by Geyer's initial monotone positive sequence.
/// A constant trace has ESS equal to its length.
inline double effective_sample_size(std::span<const double> x) {
  constexpr std::size_t kMinLength = 10;
  const std::size_t n = x.size();
  if (n < kMinLength) throw std::invalid_argument("effective_sample_size: trace too short (< 10 samples)");
  const double m = mean_of(x);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = x[i] - m;
  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += c[i] * c[i + lag];
    return acc / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return static_cast<double>(n);

  double tau = -1.0;
  double previous_pair = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
    if (pair <= 0.0) break;
    pair = std::min(pair, previous_pair);
    previous_pair = pair;
    tau += 2.0 * pair;
  }
  // cap at n log10(n), as for strongly antithetic chains
  const double dn = static_cast<double>(n);
  return std::min(dn / tau, dn * std::log10(dn));
}

/// Gelman-Rubin potential scale reduction across >= 2 equal-length chains,
/// floored at 1. Identical chains (zero between-chain spread) give exactly 1.
inline double gelman_rubin(std::span<const std::vector<double>> chains) {
  if (chains.size() < 2) throw std::invalid_argument("gelman_rubin: need at least two chains");
  const std::size_t n = chains.front().size();
  if (n < 10) throw std::invalid_argument("gelman_rubin: traces too short (< 10 samples)");
  for (const auto& c : chains)
    if (c.size() != n) throw std::invalid_argument("gelman_rubin: chains must have equal length");
  const double m = static_cast<double>(chains.size());
  const double dn = static_cast<double>(n);
  std::vector<double> means;
  double within = 0.0;
  for (const auto& c : chains) {
    means.push_back(mean_of(c));
    within += variance_of(c);
  }
  within /= m;
  if (!(within > 0.0)) return 1.0;
  const double between = dn * variance_of(means);
  const double pooled = (dn - 1.0) / dn * within + between / dn;
  return std::max(1.0, std::sqrt(pooled / within));
}

}  // namespace ssg
