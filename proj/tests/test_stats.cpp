#include <cmath>
#include <random>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "prefsteer/stats.hpp"

using namespace prefsteer;
using ::testing::ElementsAre;

namespace {

using V = std::vector<double>;

TEST(AverageRanks, TiesShareMeanPosition) {
  EXPECT_THAT(average_ranks(V{10, 20, 20, 5}), ElementsAre(2.0, 3.5, 3.5, 1.0));
  EXPECT_THAT(average_ranks(V{1, 1, 1}), ElementsAre(2.0, 2.0, 2.0));
}

TEST(Spearman, Examples) {
  EXPECT_DOUBLE_EQ(spearman_rho(V{1, 2, 3}, V{3, 2, 1}), -1.0);
  EXPECT_DOUBLE_EQ(spearman_rho(V{4, 1, 9}, V{4, 1, 9}), 1.0);
  EXPECT_NEAR(spearman_rho(V{1, 2, 3, 4}, V{2, 1, 4, 3}), 0.6, 1e-12);
}

TEST(Spearman, ConstantInputIsNaN) {
  EXPECT_TRUE(std::isnan(spearman_rho(V{1, 1, 1}, V{1, 2, 3})));
}

TEST(Spearman, PreconditionErrors) {
  EXPECT_THROW(spearman_rho(V{1, 2}, V{1, 2, 3}), InvalidArgument);
  EXPECT_THROW(spearman_rho(V{1}, V{1}), InvalidArgument);
}

// Classical formula, valid without ties.
double rank_formula(const V& x, const V& y) {
  const auto rx = average_ranks(x), ry = average_ranks(y);
  double d2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  const double n = static_cast<double>(x.size());
  return 1 - 6 * d2 / (n * (n * n - 1));
}

TEST(Spearman, BoundedAndMonotoneInvariant) {
  std::mt19937_64 gen(6);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + gen() % 30;
    V x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = z(gen);
      y[i] = x[i] * (trial % 3 - 1) + z(gen);
    }
    const double rho = spearman_rho(x, y);
    ASSERT_GE(rho, -1.0 - 1e-12);
    ASSERT_LE(rho, 1.0 + 1e-12);
    ASSERT_NEAR(rho, rank_formula(x, y), 1e-12);
    V ex = x, cube = y;
    for (double& v : ex) v = std::exp(v);
    for (double& v : cube) v = v * v * v + 2 * v;
    ASSERT_NEAR(spearman_rho(ex, cube), rho, 1e-12);
  }
}

TEST(Moments, MeanAndVariance) {
  EXPECT_DOUBLE_EQ(mean(V{1, 2, 3, 4}), 2.5);
  EXPECT_DOUBLE_EQ(sample_variance(V{1, 2, 3, 4, 5}), 2.5);
}

TEST(IncompleteBeta, MatchesBoost) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> shape(0.1, 60.0), u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const double a = shape(gen), b = shape(gen), x = u(gen);
    const double want = boost::math::ibeta(a, b, x);
    ASSERT_NEAR(regularized_incomplete_beta(a, b, x), want, 1e-9 * std::max(want, 1e-300) + 1e-15)
        << a << " " << b << " " << x;
  }
  EXPECT_EQ(regularized_incomplete_beta(2, 3, 0.0), 0.0);
  EXPECT_EQ(regularized_incomplete_beta(2, 3, 1.0), 1.0);
}

TEST(StudentT, SurvivalMatchesBoost) {
  for (double df : {1.0, 2.5, 8.0, 30.0, 250.0}) {
    const boost::math::students_t dist(df);
    for (double t : {-4.0, -1.0, 0.0, 0.3, 1.0, 2.0, 6.0}) {
      EXPECT_NEAR(student_t_sf(t, df), boost::math::cdf(boost::math::complement(dist, t)), 1e-10)
          << "df " << df << " t " << t;
    }
  }
}

TEST(Welch, IdenticalSamples) {
  const V a{1.5, 2.0, 4.0, 3.2};
  const auto r = welch_t_test(a, a);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_NEAR(r.p, 1.0, 1e-9);
}

TEST(Welch, SeparatedSamples) {
  const double eps = 1e-3;
  EXPECT_LT(welch_t_test(V{0, 0, 0, eps}, V{10, 10, 10, 10 + eps}).p, 0.05);
}

TEST(Welch, ShiftedSequenceMatchesClosedForm) {
  const auto r = welch_t_test(V{1, 2, 3, 4, 5}, V{2, 3, 4, 5, 6});
  EXPECT_NEAR(r.t, -1.0, 1e-12);
  EXPECT_NEAR(r.df, 8.0, 1e-12);
  const boost::math::students_t dist(8.0);
  EXPECT_NEAR(r.p, 2 * boost::math::cdf(boost::math::complement(dist, 1.0)), 1e-10);
}

TEST(Welch, UnequalVariancesMatchBoost) {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 100; ++trial) {
    V a(3 + gen() % 20), b(3 + gen() % 20);
    for (double& x : a) x = z(gen);
    for (double& x : b) x = 0.5 + 3 * z(gen);
    const auto r = welch_t_test(a, b);
    const double va = sample_variance(a) / a.size(), vb = sample_variance(b) / b.size();
    const double t = (mean(a) - mean(b)) / std::sqrt(va + vb);
    const double df = (va + vb) * (va + vb) /
                      (va * va / (a.size() - 1) + vb * vb / (b.size() - 1));
    ASSERT_NEAR(r.t, t, 1e-12);
    ASSERT_NEAR(r.df, df, 1e-9 * df);
    const boost::math::students_t dist(df);
    ASSERT_NEAR(r.p, 2 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 1e-9);
  }
}

TEST(Welch, Errors) {
  EXPECT_THROW(welch_t_test(V{1, 1, 1}, V{2, 2}), DegenerateSample);
  EXPECT_THROW(welch_t_test(V{1}, V{2, 3}), InvalidArgument);
}

}  // namespace
