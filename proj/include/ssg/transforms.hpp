#pragma once

// Stieltjes transform S, its inverse K, the R-transform R(x) = K(x) - 1/x and
// the quantities derived from them: v(theta) = R(2 theta), the high-temperature
// region T = (S_min/2, S_max/2) \ {0}, the marginal variances sigma^2_gamma and
// the limiting free energy (1/2) int_0^{2 theta} R(x) dx.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include <boost/math/tools/roots.hpp>

#include "ssg/quadrature.hpp"
#include "ssg/spectra.hpp"

namespace ssg {

struct TransformOptions {
  double root_tolerance = 1e-12;
  double bracket_cap = 1e12;
  // edge pdf / peak pdf above which int rho/|edge - g| is treated as divergent
  double edge_divergence_ratio = 1e-3;
};

/// theta in (lower, 0) or (0, upper).
struct HighTempRegion {
  double lower;
  double upper;

  bool contains(double theta) const { return theta != 0.0 && theta > lower && theta < upper; }
};

class TransformContext {
 public:
  explicit TransformContext(SpectralMeasure measure, TransformOptions options = {})
      : measure_(std::move(measure)), options_(options) {
    if (!(measure_.gamma_max() > 0.0)) throw std::invalid_argument("transforms need gamma_max > 0");
    compute_limits();
  }

  const SpectralMeasure& measure() const { return measure_; }
  const TransformOptions& options() const { return options_; }
  double gamma_max() const { return measure_.gamma_max(); }

  double stieltjes(double z) const {
    const double top = measure_.gamma_max();
    if (!(z < 0.0 || z > top)) throw std::domain_error("stieltjes: z = " + std::to_string(z) + " is inside support");
    double acc = 0.0;
    for (const auto& a : measure_.atoms()) acc += a.weight / (z - a.location);
    if (const auto& d = measure_.density()) {
      if (z > top) {
        const double gap = z - d->hi;
        for (const auto& n : measure_.density_nodes()) acc += n.weight / (gap + n.from_hi);
      } else {
        const double gap = z - d->lo;
        for (const auto& n : measure_.density_nodes()) acc += n.weight / (gap - n.from_lo);
      }
    }
    return acc;
  }

  /// (S_min, S_max); either may be infinite.
  std::pair<double, double> s_limits() const { return {s_min_, s_max_}; }

  HighTempRegion high_temp_region() const { return {0.5 * s_min_, 0.5 * s_max_}; }

  bool in_high_temp_region(double theta) const { return high_temp_region().contains(theta); }

  /// The unique z outside [0, gamma_max] with S(z) = x.
  double k_inverse(double x) const {
    if (!std::isfinite(x) || std::abs(x) <= options_.root_tolerance)
      throw std::domain_error("k_inverse: x = " + std::to_string(x) + " is outside the domain (x = 0 excluded)");
    if (!(x > s_min_ && x < s_max_))
      throw std::domain_error("k_inverse: x = " + std::to_string(x) + " is outside high-temperature domain (" +
                              std::to_string(s_min_) + ", " + std::to_string(s_max_) + ")");
    const double top = measure_.gamma_max();
    const double inv = 1.0 / x;
    double lo = 0.0;
    double hi = 0.0;
    // S is decreasing on each branch and squeezed between 1/z and 1/(z - top)
    if (x > 0.0) {
      hi = top + inv;
      if (inv > top) {
        lo = inv;
      } else {
        double step = hi - top;
        lo = hi;
        while (true) {
          step *= 0.5;
          lo = top + step;
          if (!(lo > top)) throw std::domain_error("k_inverse: root for x is not resolvable in double precision");
          if (stieltjes(lo) >= x) break;
        }
      }
    } else {
      lo = inv;
      if (top + inv < 0.0) {
        hi = top + inv;
      } else {
        hi = inv;
        while (true) {
          hi *= 0.5;
          if (!(hi < 0.0)) throw std::domain_error("k_inverse: root for x is not resolvable in double precision");
          if (stieltjes(hi) <= x) break;
        }
      }
    }
    if (std::abs(lo) > options_.bracket_cap || std::abs(hi) > options_.bracket_cap)
      throw std::domain_error("k_inverse: bracket exceeds bracket_cap");

    auto f = [this, x](double z) { return stieltjes(z) - x; };
    const double flo = f(lo);
    const double fhi = f(hi);
    // f(lo) >= 0 >= f(hi) exactly; a wrong sign only comes from rounding at a root
    if (flo <= 0.0) return lo;
    if (fhi >= 0.0) return hi;
    std::uintmax_t max_iter = 400;
    const auto [a, b] = boost::math::tools::toms748_solve(
        f, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits), max_iter);
    return std::abs(f(a)) <= std::abs(f(b)) ? a : b;
  }

  double r_transform(double x) const {
    const double k = k_inverse(x);
    // a point mass has K(x) = gamma + 1/x; return gamma without the round trip
    if (point_mass()) return measure_.atoms().front().location;
    return k - 1.0 / x;
  }

  bool point_mass() const { return !measure_.density() && measure_.atoms().size() == 1; }

  double v_of_theta(double theta) const {
    if (theta == 0.0) throw std::invalid_argument("v_of_theta: theta = 0 is the trivial model");
    if (!in_high_temp_region(theta)) throw std::domain_error("v_of_theta: theta outside T_rho " + region_text());
    return r_transform(2.0 * theta);
  }

  /// Distance-to-edge form of T_rho membership: 2 theta (gamma_max - v) for
  /// theta > 0 and 2 |theta| v for theta < 0 (v measured from the lower edge
  /// 0). Below 1 exactly on T_rho.
  double high_temp_margin(double theta) const {
    const double v = v_of_theta(theta);
    return theta > 0.0 ? 2.0 * theta * (measure_.gamma_max() - v) : 2.0 * -theta * v;
  }

  /// 2 theta (gamma_max - v), the upper-edge form for either sign of theta.
  double upper_edge_margin(double theta) const {
    return 2.0 * std::abs(theta) * (measure_.gamma_max() - v_of_theta(theta));
  }

  /// theta in T_rho. When true, the equivalent edge condition is cross-checked.
  bool check_high_temp(double theta) const {
    const bool inside = in_high_temp_region(theta);
    if (inside) {
      const double margin = high_temp_margin(theta);
      if (!(margin < 1.0 + kConsistencySlack))
        throw std::logic_error("internal: theta in T_rho but edge margin = " + std::to_string(margin));
    }
    return inside;
  }

  double sigma2(double theta, double gamma) const {
    if (!(gamma >= 0.0 && gamma <= measure_.gamma_max()))
      throw std::domain_error("sigma2: gamma outside [0, gamma_max]");
    const double denom = 1.0 + 2.0 * theta * (v_of_theta(theta) - gamma);
    if (!(denom > 0.0)) throw std::logic_error("internal: non-positive sigma^2 denominator inside T_rho");
    return 1.0 / denom;
  }

  /// (1/2) int_0^{2 theta} R(x) dx, using R(0) = mean at the removable point.
  double free_energy_limit(double theta) const {
    if (theta == 0.0) return 0.0;
    const double end = 2.0 * theta;
    if (!(end > s_min_ && end < s_max_))
      throw std::domain_error("free_energy_limit: path [0, 2 theta] leaves (S_min, S_max) " + region_text());
    // R is analytic on the open path; a fixed Gauss-Legendre rule converges geometrically
    double acc = 0.0;
    for (std::size_t i = 0; i < path_rule_.size(); ++i)
      acc += path_rule_.weights[i] * r_extended(0.5 * end * (path_rule_.nodes[i] + 1.0));
    return 0.25 * end * acc;
  }

  /// R with its continuous extension through 0 (two-term free-cumulant series).
  double r_extended(double x) const {
    if (std::abs(x) < kSeriesRadius) return mean_ + variance_ * x;
    return r_transform(x);
  }

  std::string region_text() const {
    const auto r = high_temp_region();
    return "(" + std::to_string(r.lower) + ", 0) U (0, " + std::to_string(r.upper) + ")";
  }

 private:
  static constexpr double kConsistencySlack = 1e-9;
  static constexpr double kSeriesRadius = 1e-6;
  static constexpr std::size_t kPathNodes = 128;

  void compute_limits() {
    const double top = measure_.gamma_max();
    const double edge_tol = 1e-12 * top;
    bool upper_infinite = false;
    bool lower_infinite = false;
    for (const auto& a : measure_.atoms()) {
      upper_infinite = upper_infinite || top - a.location <= edge_tol;
      lower_infinite = lower_infinite || a.location <= edge_tol;
    }
    if (const auto& d = measure_.density()) {
      if (top - d->hi <= edge_tol && measure_.density_edge_ratio(true) > options_.edge_divergence_ratio)
        upper_infinite = true;
      if (d->lo <= edge_tol && measure_.density_edge_ratio(false) > options_.edge_divergence_ratio)
        lower_infinite = true;
    }
    s_max_ = upper_infinite ? std::numeric_limits<double>::infinity() : edge_integral(top, true);
    s_min_ = lower_infinite ? -std::numeric_limits<double>::infinity() : -edge_integral(0.0, false);
    mean_ = measure_.mean();
    variance_ = measure_.integrate([this](double g) { return (g - mean_) * (g - mean_); });
    path_rule_ = gauss_legendre(kPathNodes);
  }

  // int rho(dg) / |edge - g|, for an edge not carrying divergent mass
  double edge_integral(double edge, bool upper) const {
    double acc = 0.0;
    for (const auto& a : measure_.atoms()) acc += a.weight / std::abs(edge - a.location);
    if (const auto& d = measure_.density()) {
      for (const auto& n : measure_.density_nodes()) {
        const double dist = upper ? (edge - d->hi) + n.from_hi : (d->lo - edge) + n.from_lo;
        acc += n.weight / dist;
      }
    }
    return acc;
  }

  SpectralMeasure measure_;
  TransformOptions options_;
  double s_min_ = 0.0;
  double s_max_ = 0.0;
  double mean_ = 0.0;
  double variance_ = 0.0;
  QuadratureRule path_rule_;
};

}  // namespace ssg
