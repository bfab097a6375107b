#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ssg/model.hpp"

namespace {

using namespace ssg;

ModelInstance make(std::vector<double> gammas, double theta = 0.0) {
  const double top = std::max(gammas.back(), 1.0);
  return ModelInstance(std::move(gammas), theta, top);
}

std::vector<double> random_state(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> g(n);
  for (auto& x : g) x = normal(rng);
  return g;
}

TEST(Hamiltonian, Examples) {
  const auto flat = make({1, 1});
  EXPECT_DOUBLE_EQ(hamiltonian(flat, SpinState(flat, {0.3, -2.0})), 2.0);
  const auto two = make({0, 1});
  EXPECT_DOUBLE_EQ(hamiltonian(two, SpinState(two, {1, 1})), 1.0);
  const auto four = make({0, 0, 1, 1});
  EXPECT_DOUBLE_EQ(hamiltonian(four, SpinState(four, {1, 0, 1, 0})), 2.0);
  EXPECT_DOUBLE_EQ(intensive_energy(four, SpinState(four, {1, 0, 1, 0})), 0.5);
}

TEST(Hamiltonian, ZeroVectorIsAnError) {
  const auto two = make({0, 1});
  EXPECT_THROW(hamiltonian(two, SpinState(two, {0, 0})), std::domain_error);
}

TEST(CavityField, Examples) {
  const auto two = make({0, 1});
  const SpinState g(two, {1, 1});
  EXPECT_DOUBLE_EQ(cavity_field(two, g, 1), 0.0);
  EXPECT_DOUBLE_EQ(cavity_field(two, g, 0), 1.0);
  const auto three = make({0, 1, 1});
  EXPECT_DOUBLE_EQ(cavity_field(three, SpinState(three, {1, 1, std::sqrt(2.0)}), 2), 0.5);
  EXPECT_THROW(cavity_field(two, g, 2), std::out_of_range);
}

TEST(DecoupledHamiltonian, Examples) {
  const auto flat = make({1, 1});
  EXPECT_DOUBLE_EQ(decoupled_hamiltonian(flat, SpinState(flat, {0.4, 1.3}), 0, 1.0), 2.0);
  const auto two = make({0, 1});
  EXPECT_DOUBLE_EQ(decoupled_hamiltonian(two, SpinState(two, {1, 1}), 0, 0.5), 1.5);
  const auto five = make({0, 0.2, 0.5, 0.9, 1.0});
  const SpinState g(five, {0.0, 1.0, -0.5, 2.0, 0.3});
  EXPECT_NEAR(decoupled_hamiltonian(five, g, 0, 0.7), 5.0 * cavity_field(five, g, 0), 1e-14);
}

TEST(Epsilon, Examples) {
  const auto two = make({0, 1});
  const SpinState g(two, {1, 1});
  EXPECT_DOUBLE_EQ(epsilon_perturbation(two, g, 0, 0.5), -0.5);
  EXPECT_DOUBLE_EQ(hamiltonian(two, g) - decoupled_hamiltonian(two, g, 0, 0.5), -0.5);
  const auto five = make({0, 0.2, 0.5, 0.9, 1.0});
  EXPECT_EQ(epsilon_perturbation(five, SpinState(five, {1.0, 0.0, -0.5, 2.0, 0.3}), 1, 0.4), 0.0);
  // |g|^2 = N and V_N = v
  const auto flat = make({1, 1, 1, 1});
  EXPECT_NEAR(epsilon_perturbation(flat, SpinState(flat, {1, -1, 1, 1}), 2, 1.0), 0.0, 1e-15);
}

TEST(Epsilon, QuadraticInGd) {
  const auto inst = make({0, 0.1, 0.4, 0.4, 0.8, 1.0});
  auto g = random_state(6, 5);
  double prev = 0.0;
  for (double scale : {1e-2, 1e-3, 1e-4}) {
    g[3] = scale;
    const double e = epsilon_perturbation(inst, SpinState(inst, g), 3, 0.6);
    if (prev != 0.0) {
      EXPECT_NEAR(e / prev, 1e-2, 1e-4);
    }
    prev = e;
  }
}

TEST(Model, CavityDecompositionIdentity) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif;
    std::vector<double> gammas(12);
    for (auto& x : gammas) x = unif(rng);
    std::sort(gammas.begin(), gammas.end());
    const auto inst = make(gammas, 0.3);
    const SpinState g(inst, random_state(12, seed + 100));
    const double v = unif(rng);
    for (std::size_t d = 0; d < 12; ++d) {
      const double h = hamiltonian(inst, g);
      EXPECT_NEAR(decoupled_hamiltonian(inst, g, d, v) + epsilon_perturbation(inst, g, d, v), h, 1e-12 * std::abs(h) + 1e-13);
      EXPECT_NEAR(epsilon_perturbation(inst, g, d, v),
                  epsilon_from_summaries(12, inst.eigenvalue(d), v, g[d], g.norm_sq(), g.energy_num()), 1e-14);
    }
  }
}

TEST(Model, NormSplitIdentity) {
  // 1/|g|^2 = 1/|g_bar|^2 - g_d^2 / (|g|^2 |g_bar|^2)
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto g = random_state(9, seed);
    double norm = 0.0;
    for (double x : g) norm += x * x;
    const std::size_t d = seed % 9;
    const double bar = norm - g[d] * g[d];
    const double rhs = 1.0 / bar - g[d] * g[d] / (norm * bar);
    EXPECT_NEAR(rhs * norm, 1.0, 1e-12);
  }
}

TEST(Model, EnergyBoundsAndShiftInvariance) {
  const std::vector<double> gammas{0.0, 0.25, 0.5, 0.5, 2.0};
  const auto inst = make(gammas);
  std::vector<double> shifted = gammas;
  const double c = 0.75;
  for (auto& x : shifted) x += c;
  const auto moved = ModelInstance(shifted, 0.0, shifted.back());
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto g = random_state(5, seed);
    const SpinState s(inst, g);
    const double h = intensive_energy(inst, s);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, inst.gamma_max());
    const double field = cavity_field(inst, s, seed % 5);
    EXPECT_GE(field, 0.0);
    EXPECT_LE(field, inst.gamma_max());
    EXPECT_NEAR(hamiltonian(moved, SpinState(moved, g)), hamiltonian(inst, s) + c * 5.0, 1e-12);
  }
}

TEST(SpinState, IncrementalSumsMatchRecomputation) {
  std::vector<double> gammas(50);
  for (std::size_t i = 0; i < gammas.size(); ++i) gammas[i] = static_cast<double>(i) / 49.0;
  const auto inst = make(gammas);
  SpinState s(inst, random_state(50, 3));
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal;
  for (int step = 0; step < 25000; ++step) s.set(step % 50, s[step % 50] + 0.5 * normal(rng));
  double norm = 0.0;
  double energy = 0.0;
  for (std::size_t i = 0; i < 50; ++i) {
    norm += s[i] * s[i];
    energy += gammas[i] * s[i] * s[i];
  }
  EXPECT_NEAR(s.norm_sq() / norm, 1.0, 1e-9);
  EXPECT_NEAR(s.energy_num() / energy, 1.0, 1e-9);
}

TEST(ModelInstance, Validation) {
  EXPECT_THROW(ModelInstance({1.0, 0.0}, 0.1, 1.0), std::invalid_argument);
  EXPECT_THROW(ModelInstance({0.0, 2.0}, 0.1, 1.0), std::invalid_argument);
  EXPECT_THROW(ModelInstance({}, 0.1, 1.0), std::invalid_argument);
  const TransformContext ctx(builtin_measure("semicircle_shifted"));
  EXPECT_THROW(ModelInstance::from_context(ctx, 10, 0.6), std::domain_error);
  EXPECT_NO_THROW(ModelInstance::from_context(ctx, 10, 0.6, ModelInstance::ThetaCheck::warn));
  EXPECT_NO_THROW(ModelInstance::from_context(ctx, 10, 0.0));
}

TEST(Haar, OneByOneAndOrthogonality) {
  const auto one = haar_orthogonal(1, 4);
  EXPECT_EQ(std::abs(one(0, 0)), 1.0);
  for (std::size_t n : {2, 5, 30}) {
    const auto o = haar_orthogonal(n, 11 + n);
    const auto eye = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    EXPECT_LT((o.transpose() * o - eye).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(std::abs(o.determinant()), 1.0, 1e-8);
  }
  EXPECT_EQ(haar_orthogonal(6, 2), haar_orthogonal(6, 2));
}

TEST(Haar, FirstEntryIsSymmetric) {
  // Haar columns are uniform on the sphere: O_11 has mean 0 and E O_11^2 = 1/N
  const std::size_t n = 4;
  double sum = 0.0;
  double sum_sq = 0.0;
  const int reps = 4000;
  for (int r = 0; r < reps; ++r) {
    const double x = haar_orthogonal(n, 1000 + r)(0, 0);
    sum += x;
    sum_sq += x * x;
  }
  EXPECT_NEAR(sum / reps, 0.0, 4.0 * std::sqrt(0.25 / reps));
  EXPECT_NEAR(sum_sq / reps, 0.25, 0.02);
}

TEST(RotatedHamiltonian, Examples) {
  const auto inst = make({0.0, 0.3, 0.7, 1.0});
  const auto eye = Eigen::MatrixXd::Identity(4, 4);
  for (Eigen::Index i = 0; i < 4; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(4);
    e(i) = 1.0;
    EXPECT_NEAR(rotated_hamiltonian(inst, eye, e), 4.0 * inst.eigenvalue(static_cast<std::size_t>(i)), 1e-14);
  }
  const auto flat = ModelInstance({0.6, 0.6, 0.6, 0.6}, 0.0, 0.6);
  const auto o = haar_orthogonal(4, 8);
  const Eigen::VectorXd s = Eigen::VectorXd::Ones(4) / 2.0;
  EXPECT_NEAR(rotated_hamiltonian(flat, o, s), 2.4, 1e-12);
  EXPECT_THROW(rotated_hamiltonian(inst, o, 2.0 * s), std::domain_error);
}

TEST(RotatedHamiltonian, MatchesEigenbasisEvaluation) {
  const std::size_t n = 40;
  std::vector<double> gammas(n);
  for (std::size_t i = 0; i < n; ++i) gammas[i] = std::sqrt(static_cast<double>(i) / (n - 1));
  const auto inst = make(gammas);
  const auto o = haar_orthogonal(n, 77);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto raw = random_state(n, seed);
    Eigen::VectorXd s = Eigen::Map<const Eigen::VectorXd>(raw.data(), static_cast<Eigen::Index>(n));
    s.normalize();
    const Eigen::VectorXd g = o * s;
    const SpinState state(inst, std::vector<double>(g.data(), g.data() + g.size()));
    EXPECT_NEAR(rotated_hamiltonian(inst, o, s), hamiltonian(inst, state), 1e-11);
  }
}

}  // namespace
