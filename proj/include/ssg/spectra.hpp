#pragma once

// Limiting eigenvalue laws rho on [0, gamma_max], their deterministic
// finite-N discretizations and the Wasserstein-1 distance between the two.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ssg/quadrature.hpp"

namespace ssg {

struct Atom {
  double location;
  double weight;
};

/// Absolutely continuous part of a spectral measure.
struct Density {
  std::function<double(double)> pdf;
  double lo = 0.0;
  double hi = 1.0;
  std::size_t nodes = 512;
};

/// A node of the density rule. `from_lo` and `from_hi` are the distances to
/// the support edges, kept separately so that z - gamma does not cancel
/// catastrophically when z sits just outside an edge.
struct DensityNode {
  double location;
  double weight;  // quadrature weight times pdf
  double from_lo;
  double from_hi;
};

struct ShiftedLocations {
  std::vector<double> locations;
  double shift;
};

/// Subtract the minimum so that the spectrum starts at exactly 0.
inline ShiftedLocations normalize_shift(std::span<const double> raw) {
  if (raw.empty()) throw std::invalid_argument("empty spectrum");
  const double shift = *std::min_element(raw.begin(), raw.end());
  ShiftedLocations out{{}, shift};
  out.locations.reserve(raw.size());
  for (double x : raw) out.locations.push_back(x - shift);
  return out;
}

class SpectralMeasure {
 public:
  static constexpr double kMassTolerance = 1e-10;

  explicit SpectralMeasure(std::vector<Atom> atoms, std::optional<Density> density = std::nullopt)
      : atoms_(std::move(atoms)), density_(std::move(density)) {
    std::sort(atoms_.begin(), atoms_.end(), [](const Atom& a, const Atom& b) { return a.location < b.location; });
    double mass = 0.0;
    gamma_max_ = 0.0;
    for (const auto& a : atoms_) {
      if (!(a.weight > 0.0 && a.weight <= 1.0)) throw std::invalid_argument("atom weight must lie in (0, 1]");
      if (!(a.location >= 0.0) || !std::isfinite(a.location))
        throw std::invalid_argument("atom location must be finite and non-negative");
      mass += a.weight;
      gamma_max_ = std::max(gamma_max_, a.location);
    }
    if (density_) {
      const auto& d = *density_;
      if (!d.pdf) throw std::invalid_argument("density without pdf");
      if (!(d.lo >= 0.0 && d.hi > d.lo && std::isfinite(d.hi)))
        throw std::invalid_argument("density support must be a finite interval in [0, inf)");
      if (d.nodes == 0) throw std::invalid_argument("density node count must be positive");
      build_density_rule();
      build_panels();
      for (const auto& n : nodes_) mass += n.weight;
      gamma_max_ = std::max(gamma_max_, d.hi);
    }
    if (std::abs(mass - 1.0) > kMassTolerance)
      throw std::invalid_argument("spectral measure total mass is " + std::to_string(mass) + ", expected 1");
  }

  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::optional<Density>& density() const { return density_; }
  std::span<const DensityNode> density_nodes() const { return nodes_; }
  double gamma_max() const { return gamma_max_; }

  /// Sum over atoms plus the fixed density rule of w * f(gamma).
  template <typename F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (const auto& a : atoms_) acc += a.weight * f(a.location);
    for (const auto& n : nodes_) acc += n.weight * f(n.location);
    return acc;
  }

  double mean() const {
    return integrate([](double g) { return g; });
  }

  /// rho([0, x]).
  double cdf(double x) const { return atom_mass_upto(x, true) + density_cdf(x); }

  /// rho([0, x)).
  double cdf_left(double x) const { return atom_mass_upto(x, false) + density_cdf(x); }

  /// Generalized inverse CDF: inf{x : F(x) >= u}.
  double quantile(double u) const {
    if (!(u > 0.0 && u <= 1.0)) throw std::invalid_argument("quantile level must lie in (0, 1]");
    for (const auto& a : atoms_) {
      if (cdf_left(a.location) < u && u <= cdf(a.location)) return a.location;
    }
    if (!density_) {
      // u falls in no jump only through rounding; pick the atom whose jump is nearest
      for (const auto& a : atoms_)
        if (u <= cdf(a.location) + kMassTolerance) return a.location;
      return atoms_.back().location;
    }
    double lo = 0.0;
    double hi = gamma_max_;
    for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (cdf(mid) >= u)
        hi = mid;
      else
        lo = mid;
    }
    return hi;
  }

  /// int_p^q F(x) dx for 0 <= p <= q.
  double integral_of_cdf(double p, double q) const {
    if (q <= p) return 0.0;
    // atoms: each atom at a contributes w * |[max(a,p), q]|
    double acc = 0.0;
    for (const auto& a : atoms_) {
      if (a.location < q) acc += a.weight * (q - std::max(a.location, p));
    }
    if (density_) {
      // int_p^q Fd(x) dx = (q - p) Fd(p) + int_p^q (q - t) f(t) dt
      acc += (q - p) * density_cdf(p);
      acc += density_moment(p, q, [q](double t) { return q - t; });
    }
    return acc;
  }

  /// One-sided pdf value at a density edge relative to the density's peak on
  /// the rule's nodes. Used to decide whether int rho(dg)/|edge - g| diverges.
  double density_edge_ratio(bool upper) const {
    if (!density_) return 0.0;
    const auto& d = *density_;
    const double h = 1e-10 * (d.hi - d.lo);
    const double edge = upper ? d.pdf(d.hi - h) : d.pdf(d.lo + h);
    double peak = 0.0;
    for (const auto& n : nodes_) peak = std::max(peak, std::abs(d.pdf(n.location)));
    if (!(peak > 0.0)) return 0.0;
    return std::abs(edge) / peak;
  }

  /// The same measure translated by c; the result must stay in [0, inf).
  SpectralMeasure shifted(double c) const {
    std::vector<Atom> atoms = atoms_;
    for (auto& a : atoms) a.location += c;
    std::optional<Density> density;
    if (density_) {
      Density d = *density_;
      auto pdf = d.pdf;
      d.pdf = [pdf, c](double x) { return pdf(x - c); };
      d.lo += c;
      d.hi += c;
      density = std::move(d);
    }
    return SpectralMeasure(std::move(atoms), std::move(density));
  }

 private:
  // Density rule in u in [0, 1] with gamma(u) = lo + L (1 - cos(pi u)) / 2.
  // The cosine map turns sqrt-type edge behaviour into an analytic integrand.
  void build_density_rule() {
    const auto& d = *density_;
    const double len = d.hi - d.lo;
    const auto rule = gauss_legendre(d.nodes);
    nodes_.clear();
    nodes_.reserve(rule.size());
    for (std::size_t i = 0; i < rule.size(); ++i) {
      const double u = 0.5 * (rule.nodes[i] + 1.0);
      const double s = std::sin(0.5 * std::numbers::pi * u);
      const double c = std::cos(0.5 * std::numbers::pi * u);
      const double from_lo = len * s * s;
      const double from_hi = len * c * c;
      const double jac = 0.5 * len * std::numbers::pi * std::sin(std::numbers::pi * u);
      const double x = d.lo + from_lo;
      nodes_.push_back({x, 0.5 * rule.weights[i] * jac * d.pdf(x), from_lo, from_hi});
    }
  }

  double atom_mass_upto(double x, bool inclusive) const {
    double acc = 0.0;
    for (const auto& a : atoms_) {
      if (a.location < x || (inclusive && a.location == x)) acc += a.weight;
    }
    return acc;
  }

  // u-coordinate of x in the density support.
  double to_u(double x) const {
    const auto& d = *density_;
    const double r = std::clamp((x - d.lo) / (d.hi - d.lo), 0.0, 1.0);
    return 2.0 / std::numbers::pi * std::asin(std::sqrt(r));
  }

  // Panel rule in u for partial integrals: kPanels equal panels with a fixed
  // Gauss-Legendre rule each, plus the cumulative mass at panel boundaries.
  static constexpr std::size_t kPanels = 256;
  static constexpr std::size_t kPanelOrder = 20;

  double mapped_integrand(double u) const {
    const auto& d = *density_;
    const double len = d.hi - d.lo;
    const double s = std::sin(0.5 * std::numbers::pi * u);
    return d.pdf(d.lo + len * s * s) * 0.5 * len * std::numbers::pi * std::sin(std::numbers::pi * u);
  }

  double u_to_x(double u) const {
    const auto& d = *density_;
    const double s = std::sin(0.5 * std::numbers::pi * u);
    return d.lo + (d.hi - d.lo) * s * s;
  }

  void build_panels() {
    panel_rule_ = gauss_legendre(kPanelOrder);
    panel_cum_.assign(kPanels + 1, 0.0);
    const double h = 1.0 / kPanels;
    for (std::size_t k = 0; k < kPanels; ++k)
      panel_cum_[k + 1] = panel_cum_[k] + panel_integral(k * h, (k + 1) * h, [](double) { return 1.0; });
  }

  template <typename G>
  double panel_integral(double u0, double u1, G&& g) const {
    const double half = 0.5 * (u1 - u0);
    const double mid = 0.5 * (u1 + u0);
    double acc = 0.0;
    for (std::size_t i = 0; i < panel_rule_.size(); ++i) {
      const double u = mid + half * panel_rule_.nodes[i];
      acc += panel_rule_.weights[i] * g(u_to_x(u)) * mapped_integrand(u);
    }
    return half * acc;
  }

  // int_{x0}^{x1} g(t) pdf(t) dt, evaluated panel by panel in the mapped variable.
  template <typename G>
  double density_moment(double x0, double x1, G&& g) const {
    const double u0 = to_u(x0);
    const double u1 = to_u(x1);
    if (u1 <= u0) return 0.0;
    const double h = 1.0 / kPanels;
    double acc = 0.0;
    for (auto k = static_cast<std::size_t>(u0 / h); k < kPanels && k * h < u1; ++k)
      acc += panel_integral(std::max(u0, k * h), std::min(u1, (k + 1) * h), g);
    return acc;
  }

  double density_cdf(double x) const {
    if (!density_ || x <= density_->lo) return 0.0;
    if (x >= density_->hi) return density_mass();
    const double u = to_u(x);
    const double h = 1.0 / kPanels;
    const auto k = std::min(static_cast<std::size_t>(u / h), kPanels - 1);
    return panel_cum_[k] + panel_integral(k * h, u, [](double) { return 1.0; });
  }

  double density_mass() const {
    double acc = 0.0;
    for (const auto& n : nodes_) acc += n.weight;
    return acc;
  }

  std::vector<Atom> atoms_;
  std::optional<Density> density_;
  std::vector<DensityNode> nodes_;
  QuadratureRule panel_rule_;
  std::vector<double> panel_cum_;
  double gamma_max_ = 0.0;
};

/// Deterministic quantile discretization gamma_i = Q((i - 1/2) / N), ascending.
inline std::vector<double> eigenvalues_for_N(const SpectralMeasure& measure, std::size_t n) {
  if (n == 0) throw std::invalid_argument("N must be positive");
  std::vector<double> out(n);
  const double dn = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = measure.quantile((static_cast<double>(i) + 0.5) / dn);
  std::sort(out.begin(), out.end());
  return out;
}

/// W1 between the empirical law of `empirical` (sorted) and `measure`, as the
/// L1 distance between the two CDFs integrated piecewise.
inline double wasserstein1(std::span<const double> empirical, const SpectralMeasure& measure) {
  if (empirical.empty()) throw std::invalid_argument("empty empirical spectrum");
  if (!std::is_sorted(empirical.begin(), empirical.end()))
    throw std::invalid_argument("empirical spectrum must be sorted");

  std::vector<double> cuts(empirical.begin(), empirical.end());
  for (const auto& a : measure.atoms()) cuts.push_back(a.location);
  if (measure.density()) {
    cuts.push_back(measure.density()->lo);
    cuts.push_back(measure.density()->hi);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const double n = static_cast<double>(empirical.size());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double p = cuts[k];
    const double q = cuts[k + 1];
    const auto below = std::upper_bound(empirical.begin(), empirical.end(), p) - empirical.begin();
    const double level = static_cast<double>(below) / n;
    const double fp = measure.cdf(p);
    const double fq = measure.cdf_left(q);
    if (fq <= level) {
      total += level * (q - p) - measure.integral_of_cdf(p, q);
    } else if (fp >= level) {
      total += measure.integral_of_cdf(p, q) - level * (q - p);
    } else {
      // F crosses the empirical level inside (p, q)
      double lo = p;
      double hi = q;
      for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (measure.cdf(mid) < level)
          lo = mid;
        else
          hi = mid;
      }
      const double x = 0.5 * (lo + hi);
      total += level * (x - p) - measure.integral_of_cdf(p, x);
      total += measure.integral_of_cdf(x, q) - level * (q - x);
    }
  }
  return std::max(total, 0.0);
}

/// Named test-fixture measures. Parameters (all optional):
///   atom:                      location (1)
///   two_atom:                  weight (0.5) at low (0), rest at high (1)
///   uniform:                   low (0), high (1)
///   semicircle_shifted:        radius (2); semicircle on [-r, r] moved to [0, 2r]
///   marchenko_pastur_shifted:  ratio (0.5); unit-variance MP law, moved to start at 0
/// Every measure except `atom` is translated so that its support starts at 0.
inline SpectralMeasure builtin_measure(const std::string& name, const std::map<std::string, double>& params = {},
                                       std::size_t density_nodes = 512) {
  auto take = [&](std::initializer_list<std::pair<const char*, double>> known) {
    for (const auto& [key, value] : params) {
      bool ok = false;
      for (const auto& [k, v] : known) ok = ok || key == k;
      if (!ok) throw std::invalid_argument("unknown parameter '" + key + "' for measure " + name);
    }
    std::map<std::string, double> out;
    for (const auto& [k, v] : known) {
      auto it = params.find(k);
      out[k] = it == params.end() ? v : it->second;
    }
    return out;
  };

  if (name == "atom") {
    const auto p = take({{"location", 1.0}});
    return SpectralMeasure({{p.at("location"), 1.0}});
  }
  if (name == "two_atom") {
    const auto p = take({{"weight", 0.5}, {"low", 0.0}, {"high", 1.0}});
    const double w = p.at("weight");
    const double low = p.at("low");
    const double high = p.at("high");
    if (!(w > 0.0 && w < 1.0)) throw std::invalid_argument("two_atom weight must lie in (0, 1)");
    if (!(high > low)) throw std::invalid_argument("two_atom requires high > low");
    return SpectralMeasure({{0.0, w}, {high - low, 1.0 - w}});
  }
  if (name == "uniform") {
    const auto p = take({{"low", 0.0}, {"high", 1.0}});
    const double len = p.at("high") - p.at("low");
    if (!(len > 0.0)) throw std::invalid_argument("uniform requires high > low");
    return SpectralMeasure({}, Density{[len](double) { return 1.0 / len; }, 0.0, len, density_nodes});
  }
  if (name == "semicircle_shifted") {
    const auto p = take({{"radius", 2.0}});
    const double r = p.at("radius");
    if (!(r > 0.0)) throw std::invalid_argument("semicircle radius must be positive");
    auto pdf = [r](double x) {
      const double y = x - r;
      const double q = r * r - y * y;
      return q > 0.0 ? 2.0 / (std::numbers::pi * r * r) * std::sqrt(q) : 0.0;
    };
    return SpectralMeasure({}, Density{pdf, 0.0, 2.0 * r, density_nodes});
  }
  if (name == "marchenko_pastur_shifted") {
    const auto p = take({{"ratio", 0.5}});
    const double lambda = p.at("ratio");
    if (!(lambda > 0.0)) throw std::invalid_argument("Marchenko-Pastur ratio must be positive");
    const double a = (1.0 - std::sqrt(lambda)) * (1.0 - std::sqrt(lambda));
    const double b = (1.0 + std::sqrt(lambda)) * (1.0 + std::sqrt(lambda));
    std::vector<Atom> atoms;
    // with a zero atom (lambda > 1) the support already starts at 0
    const double shift = lambda > 1.0 ? 0.0 : a;
    if (lambda > 1.0) atoms.push_back({0.0, 1.0 - 1.0 / lambda});
    auto pdf = [a, b, lambda, shift](double xs) {
      const double x = xs + shift;
      const double q = (b - x) * (x - a);
      return q > 0.0 && x > 0.0 ? std::sqrt(q) / (2.0 * std::numbers::pi * lambda * x) : 0.0;
    };
    return SpectralMeasure(std::move(atoms), Density{pdf, a - shift, b - shift, density_nodes});
  }
  throw std::invalid_argument("unknown measure '" + name + "'");
}

/// Atomic measure from explicit (location, weight) pairs, shifted to start at 0.
inline SpectralMeasure atomic_measure(std::vector<Atom> atoms) {
  if (atoms.empty()) throw std::invalid_argument("empty spectrum");
  std::vector<double> locs;
  for (const auto& a : atoms) locs.push_back(a.location);
  const auto shifted = normalize_shift(locs);
  for (std::size_t i = 0; i < atoms.size(); ++i) atoms[i].location = shifted.locations[i];
  return SpectralMeasure(std::move(atoms));
}

}  // namespace ssg
