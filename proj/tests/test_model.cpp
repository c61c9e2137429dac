#include "ddf/model.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ddf;
using ddf::testing::bivariate_pdf;
using ddf::testing::normal_pdf;

namespace {

Scenario equal_costs_scenario(double p0, double p1, Costs costs) {
  return Scenario(1, p0, p1, costs, Gaussian(Vector::Zero(1), Matrix::Identity(1, 1)),
                  Gaussian(Vector::Ones(1), Matrix::Identity(1, 1)));
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

}  // namespace

TEST(BayesConstants, EqualPriorsUnitCosts) {
  const auto k = bayes_constants(equal_costs_scenario(0.5, 0.5, Costs{0, 1, 1, 0}));
  EXPECT_DOUBLE_EQ(k.a, 0.5);
  EXPECT_DOUBLE_EQ(k.b, 0.5);
  EXPECT_DOUBLE_EQ(k.c, 0.5);
}

TEST(BayesConstants, UnequalPriorsAndCosts) {
  const auto k = bayes_constants(equal_costs_scenario(0.8, 0.2, Costs{0, 1, 2, 0}));
  EXPECT_DOUBLE_EQ(k.a, 0.2);
  EXPECT_DOUBLE_EQ(k.b, 1.6);
  EXPECT_DOUBLE_EQ(k.c, 1.6);
}

TEST(Scenario, RejectsCostOrdering) {
  EXPECT_THROW(equal_costs_scenario(0.5, 0.5, Costs{0, 1, 1, 1}), ModelError);
  EXPECT_THROW(equal_costs_scenario(0.5, 0.5, Costs{1, 1, 1, 0}), ModelError);
}

TEST(Scenario, RejectsPriors) {
  try {
    equal_costs_scenario(0.6, 0.6, Costs{});
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("priors must sum to 1"), std::string::npos);
  }
  EXPECT_THROW(equal_costs_scenario(-0.5, 1.5, Costs{}), ModelError);
}

TEST(Scenario, RejectsDimensionMismatch) {
  EXPECT_THROW(Scenario(3, 0.5, 0.5, Costs{}, Gaussian(Vector::Zero(2), Matrix::Identity(2, 2)),
                        Gaussian(Vector::Zero(2), Matrix::Identity(2, 2))),
               ModelError);
  EXPECT_THROW(Scenario(std::vector<int>{1, 0}, 0.5, 0.5, Costs{},
                        Gaussian(Vector::Zero(1), Matrix::Identity(1, 1)),
                        Gaussian(Vector::Zero(1), Matrix::Identity(1, 1))),
               ModelError);
}

TEST(Scenario, VectorSensorOffsets) {
  const Scenario s(std::vector<int>{2, 1, 3}, 0.5, 0.5, Costs{}, Gaussian(Vector::Zero(6), Matrix::Identity(6, 6)),
                   Gaussian(Vector::Ones(6), Matrix::Identity(6, 6)));
  EXPECT_EQ(s.num_sensors(), 3);
  EXPECT_EQ(s.sensor_offset(0), 0);
  EXPECT_EQ(s.sensor_offset(1), 2);
  EXPECT_EQ(s.sensor_offset(2), 3);
}

TEST(Gaussian, RejectsAsymmetricCovarianceNamingEntry) {
  Matrix c = Matrix::Identity(3, 3);
  c(0, 2) = 0.3;
  try {
    Gaussian(Vector::Zero(3), c);
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("not symmetric"), std::string::npos) << msg;
    EXPECT_NE(msg.find("(1,3)"), std::string::npos) << msg;
  }
}

TEST(Gaussian, RejectsIndefiniteCovariance) {
  Matrix c(2, 2);
  c << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(Gaussian(Vector::Zero(2), c), ModelError);
  EXPECT_THROW(Gaussian(Vector::Zero(2), Matrix::Identity(3, 3)), ModelError);
}

TEST(LogDensity, StandardNormalAtZero) {
  const Gaussian g(Vector::Zero(1), Matrix::Identity(1, 1));
  EXPECT_NEAR(log_density(g, Vector::Zero(1)), -0.9189385332046727, 1e-15);
}

TEST(LogDensity, ExampleOneNullAtOrigin) {
  const Scenario s = example_ten_sensors();
  EXPECT_NEAR(log_density(s.h0(), Vector::Zero(10)), -5.0 * std::log(2.0 * M_PI * 0.6), 1e-12);
}

TEST(LogDensity, DimensionMismatchThrows) {
  const Scenario s = example_ten_sensors();
  EXPECT_THROW(log_density(s.h0(), Vector::Zero(9)), ModelError);
  EXPECT_THROW(log_density(s.h1(), Vector::Zero(11)), ModelError);
}

TEST(LogDensity, QuadraticFormOracleOnRandomPoints) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  for (int d : {1, 3, 5, 12}) {
    const Matrix cov = ddf::testing::random_spd(d, rng);
    Vector mean(d);
    for (int k = 0; k < d; ++k) mean[k] = n01(rng);
    const Gaussian g(mean, cov);
    const Eigen::FullPivLU<Matrix> lu(cov);
    const Matrix inv = lu.inverse();
    const double logdet = std::log(lu.determinant());
    for (int t = 0; t < 100; ++t) {
      Vector y(d);
      for (int k = 0; k < d; ++k) y[k] = mean[k] + 2.0 * n01(rng);
      const Vector r = y - mean;
      const double expected = -0.5 * (d * std::log(2 * M_PI) + logdet + r.dot(inv * r));
      EXPECT_NEAR(g.log_pdf(y), expected, 1e-12 * std::abs(expected)) << "d=" << d;
    }
  }
}

TEST(LogDensity, SparseFactorMatchesBlockProduct) {
  // A single path component of the hundred-sensor H1 has a sparse factor.
  const Mixture mix = path_signal_mixture(50, 2, 1.0, 0.4, 0.6);
  const Gaussian& comp = mix.components()[7];
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 20; ++t) {
    Vector y(100);
    for (int k = 0; k < 100; ++k) y[k] = n01(rng);
    long double logp = 0;
    for (int k = 0; k < 100; ++k) {
      if (k == 14 || k == 15) continue;
      logp += std::log(normal_pdf(y[k], 0, 0.6L));
    }
    logp += std::log(bivariate_pdf(y[14], y[15], 1, 1, 1.0L, 1.0L, 0.4L));
    EXPECT_NEAR(comp.log_pdf(y), static_cast<double>(logp), 1e-10);
  }
}

TEST(LogDensity, PathMixtureMatchesNaiveSum) {
  const Scenario s = example_hundred_sensors();
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 5; ++t) {
    Vector y(100);
    for (int k = 0; k < 100; ++k) y[k] = std::sqrt(0.6) * n01(rng);
    y.segment(2 * t, 2).array() += 1.0;
    long double base = 1;
    for (int k = 0; k < 100; ++k) base *= normal_pdf(y[k], 0, 0.6L);
    long double total = 0;
    for (int p = 0; p < 50; ++p) {
      const long double pair = bivariate_pdf(y[2 * p], y[2 * p + 1], 1, 1, 1.0L, 1.0L, 0.4L);
      const long double noise = normal_pdf(y[2 * p], 0, 0.6L) * normal_pdf(y[2 * p + 1], 0, 0.6L);
      total += base / noise * pair / 50;
    }
    const double expected = static_cast<double>(std::log(total));
    EXPECT_NEAR(log_density(s.h1(), y), expected, 1e-10 * std::abs(expected));
  }
}

TEST(LogDensity, MixtureSkipsZeroWeight) {
  const Gaussian a(Vector::Zero(1), Matrix::Identity(1, 1));
  const Gaussian b(Vector::Constant(1, 5.0), Matrix::Identity(1, 1));
  const Mixture m({1.0, 0.0}, {a, b});
  for (double x : {-2.0, 0.0, 5.0}) EXPECT_DOUBLE_EQ(m.log_pdf(vec({x})), a.log_pdf(vec({x})));
}

TEST(Mixture, RejectsBadWeights) {
  const Gaussian a(Vector::Zero(1), Matrix::Identity(1, 1));
  EXPECT_THROW(Mixture({0.5, 0.6}, {a, a}), ModelError);
  EXPECT_THROW(Mixture({1.2, -0.2}, {a, a}), ModelError);
  EXPECT_THROW(Mixture({1.0}, {a, a}), ModelError);
  EXPECT_THROW(Mixture({0.5, 0.5}, {a, Gaussian(Vector::Zero(2), Matrix::Identity(2, 2))}), ModelError);
}

TEST(Density, IntegratesToOneIn1D) {
  const Gaussian g(vec({0.3}), Matrix::Constant(1, 1, 0.7));
  const Mixture m({0.3, 0.7}, {g, Gaussian(vec({-1.0}), Matrix::Constant(1, 1, 0.2))});
  for (const Density& d : {Density(g), Density(m)}) {
    const double lo = -15, hi = 15;
    const int n = 60000;
    const double h = (hi - lo) / n;
    double sum = 0;
    for (int k = 0; k <= n; ++k) {
      const double w = (k == 0 || k == n) ? 0.5 : 1.0;
      sum += w * std::exp(d.log_pdf(vec({lo + k * h})));
    }
    EXPECT_NEAR(sum * h, 1.0, 1e-6);
  }
}

TEST(Density, IntegratesToOneIn2D) {
  Matrix c(2, 2);
  c << 1.0, 0.4, 0.4, 0.8;
  const Gaussian g(vec({0.2, -0.1}), c);
  const Mixture m({0.5, 0.5}, {g, Gaussian(vec({1.0, 1.0}), Matrix::Identity(2, 2) * 0.5)});
  for (const Density& d : {Density(g), Density(m)}) {
    const double lo = -9, hi = 10;
    const int n = 800;
    const double h = (hi - lo) / n;
    double sum = 0;
    for (int a = 0; a <= n; ++a) {
      for (int b = 0; b <= n; ++b) {
        const double w = ((a == 0 || a == n) ? 0.5 : 1.0) * ((b == 0 || b == n) ? 0.5 : 1.0);
        sum += w * std::exp(d.log_pdf(vec({lo + a * h, lo + b * h})));
      }
    }
    EXPECT_NEAR(sum * h * h, 1.0, 1e-6);
  }
}

TEST(Lhat, ZeroAtSymmetricPoint) {
  const Scenario s(1, 0.5, 0.5, Costs{}, Gaussian(vec({-1.0}), Matrix::Identity(1, 1)),
                   Gaussian(vec({1.0}), Matrix::Identity(1, 1)));
  EXPECT_EQ(lhat(s, vec({0.0})), 0.0);
}

TEST(Lhat, PositiveAtSignalMean) {
  const Scenario s = example_ten_sensors();
  const Vector y = Vector::Ones(10);
  const double expected = 0.5 * std::exp(log_density(s.h1(), y)) - 0.5 * std::exp(log_density(s.h0(), y));
  EXPECT_GT(lhat(s, y), 0.0);
  EXPECT_NEAR(lhat(s, y), expected, 1e-12 * std::abs(expected));
}

TEST(Lhat, LinearInCosts) {
  const Scenario s = example_ten_sensors();
  const Scenario scaled = s.with_costs(0.5, 0.5, Costs{0, 10, 10, 0});
  const Scenario doubled = s.with_costs(0.5, 0.5, Costs{0, 2, 2, 0});
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 50; ++t) {
    Vector y(10);
    for (int k = 0; k < 10; ++k) y[k] = n01(rng);
    const double base = lhat(s, y);
    EXPECT_NEAR(lhat(scaled, y), 10 * base, 1e-12 * std::abs(10 * base));
    EXPECT_NEAR(lhat(doubled, y), 2 * base, 1e-12 * std::abs(2 * base));
  }
}

TEST(Lhat, MatchesLongDoubleNearUnderflow) {
  const Scenario s = example_hundred_sensors();
  const Vector y = Vector::Constant(100, 2.7);
  const double l0 = log_density(s.h0(), y);
  const double l1 = log_density(s.h1(), y);
  // exp of either log density alone is close to the smallest normal double.
  ASSERT_LT(l0, -600.0);
  const BayesConstants k = bayes_constants(s);
  const long double want = static_cast<long double>(k.a) * std::exp(static_cast<long double>(l1)) -
                           static_cast<long double>(k.b) * std::exp(static_cast<long double>(l0));
  const double v = lhat(s, y);
  EXPECT_GT(v, 0.0);
  EXPECT_NEAR(v / static_cast<double>(want), 1.0, 1e-9);
}

TEST(Sample, DeterministicGivenSeed) {
  const Scenario s = example_ten_sensors();
  EXPECT_EQ(sample(s.h1(), 3, 42), sample(s.h1(), 3, 42));
  EXPECT_NE(sample(s.h1(), 3, 42), sample(s.h1(), 3, 43));
}

TEST(Sample, MomentsOfScalarGaussian) {
  const Gaussian g(vec({1.0}), Matrix::Constant(1, 1, 0.4));
  const Matrix x = sample(g, 100000, 9);
  const double mean = x.mean();
  const double var = (x.array() - mean).square().sum() / (x.cols() - 1);
  EXPECT_NEAR(mean, 1.0, 0.02);
  EXPECT_NEAR(var, 0.4, 0.02);
}

TEST(Sample, DegenerateMixtureUsesFirstComponent) {
  const Mixture m({1.0, 0.0}, {Gaussian(vec({-50.0}), Matrix::Identity(1, 1)),
                               Gaussian(vec({50.0}), Matrix::Identity(1, 1))});
  const Matrix x = sample(m, 2000, 4);
  EXPECT_LT(x.maxCoeff(), -40.0);
}

TEST(Sample, CorrelatedCovarianceRecovered) {
  const Scenario s = example_ten_sensors();
  const Matrix x = sample(s.h1(), 50000, 17);
  const Vector mean = x.rowwise().mean();
  const Matrix centered = x.colwise() - mean;
  const Matrix cov = centered * centered.transpose() / (x.cols() - 1);
  EXPECT_NEAR(mean[3], 1.0, 0.03);
  EXPECT_NEAR(cov(2, 2), 1.0, 0.03);
  EXPECT_NEAR(cov(2, 7), 0.4, 0.03);
}

TEST(Sample, RejectsZeroCount) {
  EXPECT_THROW(sample(example_ten_sensors().h0(), 0, 1), ModelError);
}
