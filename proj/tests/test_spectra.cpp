#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "ssg/quadrature.hpp"
#include "ssg/spectra.hpp"

namespace {

using namespace ssg;

TEST(Quadrature, GaussLegendreIntegratesPolynomialsExactly) {
  const auto rule = gauss_legendre(7);
  for (int k = 0; k <= 13; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) acc += rule.weights[i] * std::pow(rule.nodes[i], k);
    const double exact = k % 2 == 1 ? 0.0 : 2.0 / (k + 1);
    EXPECT_NEAR(acc, exact, 1e-14) << "degree " << k;
  }
}

TEST(Quadrature, GaussLegendreSingleNode) {
  const auto rule = gauss_legendre(1);
  ASSERT_EQ(rule.size(), 1u);
  EXPECT_EQ(rule.nodes[0], 0.0);
  EXPECT_EQ(rule.weights[0], 2.0);
}

TEST(Quadrature, GaussHermiteGaussianMoments) {
  const auto rule = gauss_hermite(64);
  // E X^{2k} = (2k-1)!! sigma^{2k}
  const double var = 1.7;
  double dfact = 1.0;
  for (int k = 1; k <= 6; ++k) {
    dfact *= 2 * k - 1;
    const double m = gaussian_expectation([k](double x) { return std::pow(x, 2 * k); }, var, rule);
    EXPECT_NEAR(m / (dfact * std::pow(var, k)), 1.0, 1e-12);
  }
  EXPECT_NEAR(gaussian_expectation([](double x) { return x; }, var, rule), 0.0, 1e-14);
}

TEST(NormalizeShift, Examples) {
  const std::vector<double> a{3, 4, 5};
  const auto r = normalize_shift(a);
  EXPECT_EQ(r.locations, (std::vector<double>{0, 1, 2}));
  EXPECT_EQ(r.shift, 3.0);

  const std::vector<double> b{0, 1};
  EXPECT_EQ(normalize_shift(b).locations, b);
  EXPECT_EQ(normalize_shift(b).shift, 0.0);

  const std::vector<double> c{-1, 1};
  EXPECT_EQ(normalize_shift(c).locations, (std::vector<double>{0, 2}));
  EXPECT_EQ(normalize_shift(c).shift, -1.0);
}

TEST(NormalizeShift, IdempotentAndRejectsEmpty) {
  const std::vector<double> raw{2.5, -0.75, 4.0, 1.0};
  const auto once = normalize_shift(raw);
  const auto twice = normalize_shift(once.locations);
  EXPECT_EQ(twice.locations, once.locations);
  EXPECT_EQ(twice.shift, 0.0);
  EXPECT_THROW(normalize_shift(std::vector<double>{}), std::invalid_argument);
}

TEST(SpectralMeasure, ValidatesMassAndWeights) {
  EXPECT_THROW(SpectralMeasure({{0.0, 0.5}, {1.0, 0.4}}), std::invalid_argument);
  EXPECT_THROW(SpectralMeasure({{0.0, 1.5}}), std::invalid_argument);
  EXPECT_THROW(SpectralMeasure({{-1.0, 1.0}}), std::invalid_argument);
  EXPECT_NO_THROW(SpectralMeasure({{0.0, 0.5}, {1.0, 0.5}}));
}

TEST(EigenvaluesForN, Examples) {
  EXPECT_EQ(eigenvalues_for_N(builtin_measure("atom"), 3), (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(eigenvalues_for_N(builtin_measure("two_atom"), 4), (std::vector<double>{0, 0, 1, 1}));
  const auto u = eigenvalues_for_N(builtin_measure("uniform"), 2);
  ASSERT_EQ(u.size(), 2u);
  EXPECT_NEAR(u[0], 0.25, 1e-12);
  EXPECT_NEAR(u[1], 0.75, 1e-12);
}

TEST(Wasserstein1, Examples) {
  EXPECT_NEAR(wasserstein1(std::vector<double>{1, 1, 1}, builtin_measure("atom")), 0.0, 1e-15);
  EXPECT_NEAR(wasserstein1(std::vector<double>{0, 1}, SpectralMeasure({{0.0, 1.0}})), 0.5, 1e-15);
  EXPECT_NEAR(wasserstein1(std::vector<double>{0, 0, 1, 1}, builtin_measure("two_atom")), 0.0, 1e-15);
}

TEST(Wasserstein1, UniformAgainstMidpointQuantiles) {
  // F_emp vs t on [0,1] for N midpoint quantiles: N triangles of area 1/(4N^2)
  for (std::size_t n : {1, 2, 5, 40}) {
    const auto eig = eigenvalues_for_N(builtin_measure("uniform"), n);
    EXPECT_NEAR(wasserstein1(eig, builtin_measure("uniform")), 1.0 / (4.0 * n), 1e-9) << n;
  }
}

TEST(Builtins, AtomAndTwoAtom) {
  const auto a = builtin_measure("atom");
  ASSERT_EQ(a.atoms().size(), 1u);
  EXPECT_EQ(a.atoms()[0].location, 1.0);
  EXPECT_EQ(a.gamma_max(), 1.0);

  const auto t = builtin_measure("two_atom");
  ASSERT_EQ(t.atoms().size(), 2u);
  EXPECT_EQ(t.atoms()[0].location, 0.0);
  EXPECT_EQ(t.atoms()[1].location, 1.0);
  EXPECT_EQ(t.atoms()[0].weight, 0.5);
  EXPECT_EQ(t.gamma_max(), 1.0);
  EXPECT_THROW(builtin_measure("two_atom", {{"mass", 0.5}}), std::invalid_argument);
  EXPECT_THROW(builtin_measure("cauchy"), std::invalid_argument);
}

TEST(Builtins, SemicircleMassByIndependentQuadrature) {
  const auto m = builtin_measure("semicircle_shifted");
  EXPECT_EQ(m.gamma_max(), 4.0);
  // x = 2 + 2 sin(t): the sqrt edge becomes a smooth cos^2 integrand
  const int k = 4000;
  double acc = 0.0;
  const double h = std::numbers::pi / k;
  for (int i = 0; i < k; ++i) {
    const double t = -std::numbers::pi / 2 + (i + 0.5) * h;
    const double x = 2.0 + 2.0 * std::sin(t);
    acc += m.density()->pdf(x) * 2.0 * std::cos(t) * h;
  }
  EXPECT_NEAR(acc, 1.0, 1e-9);
  EXPECT_NEAR(m.density()->pdf(2.0), 1.0 / std::numbers::pi, 1e-15);
  EXPECT_NEAR(m.mean(), 2.0, 1e-12);
  EXPECT_NEAR(m.integrate([](double g) { return (g - 2.0) * (g - 2.0); }), 1.0, 1e-12);
}

TEST(Builtins, MarchenkoPasturMassAndMoments) {
  for (double lambda : {0.25, 0.5, 2.0}) {
    const auto m = builtin_measure("marchenko_pastur_shifted", {{"ratio", lambda}});
    double mass = 0.0;
    for (const auto& a : m.atoms()) mass += a.weight;
    for (const auto& n : m.density_nodes()) mass += n.weight;
    EXPECT_NEAR(mass, 1.0, 1e-10);
    // unit-mean MP law has variance lambda; the shift does not change it
    const double mu = m.mean();
    EXPECT_NEAR(m.integrate([mu](double g) { return (g - mu) * (g - mu); }), lambda, 1e-9);
    EXPECT_NEAR(m.cdf_left(0.0), 0.0, 1e-15);
  }
}

TEST(Builtins, QuantileDiscretizationConvergesInW1) {
  for (const char* name : {"atom", "two_atom", "uniform", "semicircle_shifted", "marchenko_pastur_shifted"}) {
    const auto m = builtin_measure(name);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t n : {10, 100, 1000}) {
      const double w = wasserstein1(eigenvalues_for_N(m, n), m);
      EXPECT_LE(w, prev + 1e-12) << name << " N=" << n;
      if (m.density() == std::nullopt) {
        EXPECT_LE(w, m.gamma_max() / n) << name;
      }
      prev = w;
    }
  }
}

TEST(Builtins, QuantileDiscretizationPreservesMean) {
  const auto m = builtin_measure("semicircle_shifted");
  for (std::size_t n : {50, 500}) {
    const auto eig = eigenvalues_for_N(m, n);
    double mean = 0.0;
    for (double g : eig) mean += g;
    mean /= static_cast<double>(n);
    EXPECT_LE(std::abs(mean - m.mean()), m.gamma_max() / n);
  }
}

TEST(SpectralMeasure, CdfAndQuantileAgree) {
  const auto m = builtin_measure("marchenko_pastur_shifted", {{"ratio", 2.0}});
  for (double u : {0.1, 0.3, 0.5, 0.6, 0.75, 0.99}) {
    const double q = m.quantile(u);
    EXPECT_GE(m.cdf(q), u - 1e-10);
    if (q > 0.0) {
      EXPECT_LE(m.cdf_left(q), u + 1e-10);
    }
  }
}

}  // namespace
