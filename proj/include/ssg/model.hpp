#pragma once

// Finite-N symmetric spherical model in the eigenbasis of the coupling matrix:
//   H_N(g) = N sum_i gamma_i g_i^2 / |g|^2,  g ~ standard normal base measure.
// Cavity quantities single out one coordinate d and write H_N = H_d + eps_N.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ssg/spectra.hpp"
#include "ssg/transforms.hpp"

namespace ssg {

class ModelInstance {
 public:
  enum class ThetaCheck { strict, warn };

  ModelInstance(std::vector<double> eigenvalues, double theta, double gamma_max)
      : eigenvalues_(std::move(eigenvalues)), theta_(theta), gamma_max_(gamma_max) {
    if (eigenvalues_.empty()) throw std::invalid_argument("model needs N >= 1 eigenvalues");
    if (!std::isfinite(theta_)) throw std::invalid_argument("theta must be finite");
    if (!(gamma_max_ > 0.0)) throw std::invalid_argument("gamma_max must be positive");
    if (!std::is_sorted(eigenvalues_.begin(), eigenvalues_.end()))
      throw std::invalid_argument("eigenvalues must be sorted ascending");
    if (eigenvalues_.front() < 0.0 || eigenvalues_.back() > gamma_max_)
      throw std::invalid_argument("eigenvalues must lie in [0, gamma_max]");
  }

  /// Quantile-discretized instance of `ctx`'s measure. theta is checked
  /// against T_rho: `strict` rejects, `warn` prints to stderr and continues.
  static ModelInstance from_context(const TransformContext& ctx, std::size_t n, double theta,
                                    ThetaCheck check = ThetaCheck::strict) {
    if (!ctx.in_high_temp_region(theta) && theta != 0.0) {
      const std::string msg = "theta = " + std::to_string(theta) + " is outside T_rho " + ctx.region_text();
      if (check == ThetaCheck::strict) throw std::domain_error(msg);
      std::cerr << "warning: " << msg << "; the top coordinate is expected to be of order N\n";
    }
    return ModelInstance(eigenvalues_for_N(ctx.measure(), n), theta, ctx.gamma_max());
  }

  std::size_t size() const { return eigenvalues_.size(); }
  double theta() const { return theta_; }
  double gamma_max() const { return gamma_max_; }
  std::span<const double> eigenvalues() const { return eigenvalues_; }
  double eigenvalue(std::size_t i) const { return eigenvalues_[i]; }

  ModelInstance with_theta(double theta) const { return ModelInstance(eigenvalues_, theta, gamma_max_); }

  double mean_eigenvalue() const {
    double acc = 0.0;
    for (double g : eigenvalues_) acc += g;
    return acc / static_cast<double>(eigenvalues_.size());
  }

  std::size_t argmin_eigenvalue() const { return 0; }
  std::size_t argmax_eigenvalue() const { return eigenvalues_.size() - 1; }

 private:
  std::vector<double> eigenvalues_;
  double theta_;
  double gamma_max_;
};

/// Configuration g with cached |g|^2 and sum_i gamma_i g_i^2.
///
/// `set` updates both sums incrementally; every kRefreshInterval single
/// coordinate updates the sums are recomputed from scratch to bound drift.
/// The instance must outlive the state.
class SpinState {
 public:
  static constexpr std::size_t kRefreshInterval = 10000;

  SpinState(const ModelInstance& inst, std::vector<double> g) : gammas_(inst.eigenvalues()), g_(std::move(g)) {
    if (g_.size() != gammas_.size()) throw std::invalid_argument("state dimension does not match model");
    refresh();
  }

  std::size_t size() const { return g_.size(); }
  std::span<const double> values() const { return g_; }
  double operator[](std::size_t i) const { return g_[i]; }
  double norm_sq() const { return norm_sq_; }
  double energy_num() const { return energy_num_; }

  void set(std::size_t i, double value) {
    const double delta = value * value - g_[i] * g_[i];
    norm_sq_ += delta;
    energy_num_ += gammas_[i] * delta;
    g_[i] = value;
    if (++updates_ >= kRefreshInterval) refresh();
  }

  void refresh() {
    norm_sq_ = 0.0;
    energy_num_ = 0.0;
    for (std::size_t i = 0; i < g_.size(); ++i) {
      const double sq = g_[i] * g_[i];
      norm_sq_ += sq;
      energy_num_ += gammas_[i] * sq;
    }
    updates_ = 0;
  }

 private:
  std::span<const double> gammas_;
  std::vector<double> g_;
  double norm_sq_ = 0.0;
  double energy_num_ = 0.0;
  std::size_t updates_ = 0;
};

namespace detail {

inline void require_nonzero(double norm_sq, const char* what) {
  if (!(norm_sq > 0.0)) throw std::domain_error(std::string(what) + ": zero vector");
}

inline void require_cavity(const ModelInstance& inst, std::size_t d) {
  if (inst.size() < 2) throw std::invalid_argument("cavity quantities need N >= 2");
  if (d >= inst.size()) throw std::out_of_range("cavity index out of range");
}

}  // namespace detail

inline double hamiltonian(const ModelInstance& inst, const SpinState& state) {
  detail::require_nonzero(state.norm_sq(), "hamiltonian");
  return static_cast<double>(inst.size()) * state.energy_num() / state.norm_sq();
}

inline double intensive_energy(const ModelInstance& inst, const SpinState& state) {
  return hamiltonian(inst, state) / static_cast<double>(inst.size());
}

/// sum_{i != d} gamma_i g_i^2 / |g_bar|^2; d is 0-based.
inline double cavity_field(const ModelInstance& inst, const SpinState& state, std::size_t d) {
  detail::require_cavity(inst, d);
  const double gd2 = state[d] * state[d];
  const double bar_norm = state.norm_sq() - gd2;
  detail::require_nonzero(bar_norm, "cavity_field");
  return (state.energy_num() - inst.eigenvalue(d) * gd2) / bar_norm;
}

/// H_d(g) = N V_N - (v - gamma_d) g_d^2.
inline double decoupled_hamiltonian(const ModelInstance& inst, const SpinState& state, std::size_t d, double v) {
  const double field = cavity_field(inst, state, d);
  const double gd2 = state[d] * state[d];
  return static_cast<double>(inst.size()) * field - (v - inst.eigenvalue(d)) * gd2;
}

/// eps_N = (N/|g|^2 - 1)(gamma_d - V_N) g_d^2 + (v - V_N) g_d^2, so that H_N = H_d + eps_N.
inline double epsilon_perturbation(const ModelInstance& inst, const SpinState& state, std::size_t d, double v) {
  detail::require_nonzero(state.norm_sq(), "epsilon_perturbation");
  const double field = cavity_field(inst, state, d);
  const double gd2 = state[d] * state[d];
  const double n = static_cast<double>(inst.size());
  return (n / state.norm_sq() - 1.0) * (inst.eigenvalue(d) - field) * gd2 + (v - field) * gd2;
}

/// Same as `epsilon_perturbation` from the scalar summaries a chain records.
inline double epsilon_from_summaries(std::size_t n, double gamma_d, double v, double g_d, double norm_sq,
                                     double energy_num) {
  const double gd2 = g_d * g_d;
  const double bar_norm = norm_sq - gd2;
  if (!(norm_sq > 0.0) || !(bar_norm > 0.0)) throw std::domain_error("epsilon: degenerate norms");
  const double field = (energy_num - gamma_d * gd2) / bar_norm;
  return (static_cast<double>(n) / norm_sq - 1.0) * (gamma_d - field) * gd2 + (v - field) * gd2;
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of diag(R) folded into Q.
inline Eigen::MatrixXd haar_orthogonal(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("haar_orthogonal: N must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const auto dim = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd a(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j)
    for (Eigen::Index i = 0; i < dim; ++i) a(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < dim; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  return q;
}

/// N s^T (O^T D O) s for a unit vector s. Dense, O(N^2); for cross-checks only.
inline double rotated_hamiltonian(const ModelInstance& inst, const Eigen::MatrixXd& o, const Eigen::VectorXd& s) {
  const auto n = static_cast<Eigen::Index>(inst.size());
  if (o.rows() != n || o.cols() != n || s.size() != n) throw std::invalid_argument("rotated_hamiltonian: size mismatch");
  if (std::abs(s.norm() - 1.0) > 1e-10) throw std::domain_error("rotated_hamiltonian: s must be a unit vector");
  const Eigen::Map<const Eigen::VectorXd> gammas(inst.eigenvalues().data(), n);
  const Eigen::MatrixXd j = o.transpose() * gammas.asDiagonal() * o;
  return static_cast<double>(inst.size()) * s.dot(j * s);
}

}  // namespace ssg
