#include <cmath>
#include <limits>
#include <random>

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "prefsteer/core_model.hpp"
#include "test_util.hpp"

using namespace prefsteer;
using prefsteer::testing::probs_of;
using ::testing::DoubleNear;
using ::testing::ElementsAre;
using ::testing::Pointwise;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(Preference, AcceptsSimplexPoint) {
  const std::vector<double> raw{0.5, 0.5};
  const auto p = Preference::make(raw);
  EXPECT_THAT(std::vector<double>(p.weights().begin(), p.weights().end()), ElementsAre(0.5, 0.5));
}

TEST(Preference, NormalizesWhenAsked) {
  const std::vector<double> raw{2, 2};
  const auto p = Preference::make(raw, true);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(Preference, RejectsNegativeWeight) {
  const std::vector<double> raw{-0.1, 1.1};
  EXPECT_THROW(Preference::make(raw), SimplexViolation);
  EXPECT_THROW(Preference::make(raw, true), SimplexViolation);
}

TEST(Preference, RejectsBadSumsAndEmpty) {
  const std::vector<double> off{0.5, 0.6};
  const std::vector<double> zero{0.0, 0.0};
  EXPECT_THROW(Preference::make(off), SimplexViolation);
  EXPECT_THROW(Preference::make(zero, true), SimplexViolation);
  EXPECT_THROW(Preference::make(std::vector<double>{}), SimplexViolation);
  const std::vector<double> nan{std::nan(""), 1.0};
  EXPECT_THROW(Preference::make(nan, true), SimplexViolation);
}

TEST(Preference, ToleratesTinySumError) {
  const std::vector<double> raw{0.3, 0.7 + 5e-10};
  EXPECT_NO_THROW(Preference::make(raw));
  const std::vector<double> too_far{0.3, 0.7 + 5e-9};
  EXPECT_THROW(Preference::make(too_far), SimplexViolation);
}

TEST(Preference, NormalizeIsIdempotent) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> raw(1 + trial % 5);
    for (double& x : raw) x = u(gen);
    const auto once = Preference::make(raw, true);
    const auto twice = Preference::make(once.weights(), true);
    for (std::size_t i = 0; i < raw.size(); ++i) EXPECT_NEAR(once[i], twice[i], 1e-15);
  }
}

TEST(Softmax, UniformForEqualLogits) {
  const std::vector<double> x{0, 0, 0};
  EXPECT_THAT(probs_of(softmax(x)), Pointwise(DoubleNear(1e-15), {1.0 / 3, 1.0 / 3, 1.0 / 3}));
}

TEST(Softmax, LogTwoGivesTwoThirds) {
  const std::vector<double> x{std::log(2.0), 0.0};
  EXPECT_THAT(probs_of(softmax(x)), Pointwise(DoubleNear(1e-15), {2.0 / 3, 1.0 / 3}));
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
  const std::vector<double> x{1000, 0};
  const auto d = softmax(x);
  EXPECT_DOUBLE_EQ(d[0], 1.0);
  EXPECT_GE(d[1], 0.0);
  EXPECT_LT(d[1], 1e-300);
}

TEST(Softmax, RejectsNaNAndBadTemperature) {
  const std::vector<double> x{0.0, std::nan("")};
  EXPECT_THROW(softmax(x), NumericError);
  const std::vector<double> y{0.0, kInf};
  EXPECT_THROW(softmax(y), NumericError);
  const std::vector<double> z{0.0, 1.0};
  EXPECT_THROW(softmax(z, 0.0), InvalidArgument);
}

TEST(Softmax, TemperatureSharpens) {
  const std::vector<double> x{1.0, 0.0};
  EXPECT_GT(softmax(x, 0.5)[0], softmax(x, 1.0)[0]);
  EXPECT_NEAR(softmax(x, 0.5)[0], 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
}

TEST(Softmax, SumsToOneAndShiftInvariant) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  std::uniform_real_distribution<double> small(-30, 30);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> x(2 + trial % 15);
    for (double& v : x) v = trial % 2 ? u(gen) : small(gen);
    const auto d = softmax(x);
    double sum = 0;
    for (double p : d.probs()) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-9);

    const double c = small(gen);
    std::vector<double> shifted = x;
    for (double& v : shifted) v += c;
    const auto e = softmax(shifted);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(d[i], e[i], 1e-12);
  }
}

TEST(RenormalizeOver, RescalesSubset) {
  const auto d = TokenDistribution::from_probs({0.5, 0.3, 0.2});
  EXPECT_THAT(probs_of(renormalize_over(d, {0, 1})), Pointwise(DoubleNear(1e-15), {0.625, 0.375, 0.0}));
}

TEST(RenormalizeOver, FullSupportUnchanged) {
  const auto d = TokenDistribution::from_probs({0.5, 0.5});
  EXPECT_EQ(probs_of(renormalize_over(d, {0, 1})), probs_of(d));
}

TEST(RenormalizeOver, ZeroMassIsEmptySupport) {
  const auto d = TokenDistribution::from_probs({1.0, 0.0});
  EXPECT_THROW(renormalize_over(d, {1}), EmptySupport);
  EXPECT_THROW(renormalize_over(d, {}), EmptySupport);
  EXPECT_THROW(renormalize_over(d, {5}), InvalidArgument);
}

TEST(RenormalizeOver, PreservesRankingOfSurvivors) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> raw(8);
    for (double& x : raw) x = u(gen);
    const auto d = softmax(raw);
    TokenSet subset;
    for (TokenId t = 0; t < 8; ++t) {
      if (u(gen) < 0.6) subset.push_back(t);
    }
    if (subset.empty()) subset.push_back(0);
    const auto r = renormalize_over(d, subset);
    for (TokenId a : subset) {
      for (TokenId b : subset) {
        if (d[a] < d[b]) {
          EXPECT_LT(r[a], r[b]);
        }
      }
    }
  }
}

TEST(TokenDistribution, Validation) {
  EXPECT_THROW(TokenDistribution::from_probs({0.5, 0.6}), NumericError);
  EXPECT_THROW(TokenDistribution::from_probs({-0.1, 1.1}), NumericError);
  EXPECT_THROW(TokenDistribution::from_probs({}), NumericError);
  EXPECT_NO_THROW(TokenDistribution::from_probs({0.5, 0.5 + 5e-10}));
  EXPECT_EQ(TokenDistribution::one_hot(3, 2).argmax(), 2);
  EXPECT_EQ(TokenDistribution::from_probs({0.4, 0.4, 0.2}).argmax(), 0);
}

TEST(LogProbVector, Validation) {
  EXPECT_NO_THROW(LogProbVector::from_logprobs({std::log(0.25), std::log(0.75)}));
  EXPECT_NO_THROW(LogProbVector::from_logprobs({0.0, -kInf}));
  EXPECT_THROW(LogProbVector::from_logprobs({0.0, 0.0}), NumericError);
  EXPECT_THROW(LogProbVector::from_logprobs({std::nan(""), 0.0}), NumericError);
  EXPECT_THROW(LogProbVector::normalized({-kInf, -kInf}), NumericError);
  const auto v = LogProbVector::normalized({1.0, 1.0});
  EXPECT_NEAR(v[0], std::log(0.5), 1e-15);
  EXPECT_NEAR(logsumexp(v.values()), 0.0, 1e-15);
}

TEST(LogSumExp, Basics) {
  const std::vector<double> x{std::log(1.0), std::log(3.0)};
  EXPECT_NEAR(logsumexp(x), std::log(4.0), 1e-15);
  const std::vector<double> all_neg{-kInf, -kInf};
  EXPECT_EQ(logsumexp(all_neg), -kInf);
  const std::vector<double> big{1000.0, 1000.0};
  EXPECT_NEAR(logsumexp(big), 1000.0 + std::log(2.0), 1e-12);
}

TEST(PromptPair, IdenticalPromptsNeedDegenerateFlag) {
  EXPECT_THROW(PromptPair::make("x", {1, 2}, {1, 2}), InvalidArgument);
  EXPECT_TRUE(PromptPair::make("x", {1, 2}, {1, 2}, true).degenerate);
  EXPECT_NO_THROW(PromptPair::make("x", {1, 2}, {2, 1}));
}

TEST(GenParams, Defaults) {
  const GenParams g;
  EXPECT_EQ(g.nucleus_p, 0.95);
  EXPECT_EQ(g.temperature, 1.0);
  EXPECT_EQ(g.max_tokens, 128);
  EXPECT_EQ(g.alpha, 0.1);
  EXPECT_FALSE(g.greedy);
  EXPECT_NO_THROW(g.validate());
}

TEST(GenParams, Validation) {
  GenParams g;
  g.nucleus_p = 0.0;
  EXPECT_THROW(g.validate(), InvalidArgument);
  g = GenParams{};
  g.temperature = -1;
  EXPECT_THROW(g.validate(), InvalidArgument);
  g = GenParams{};
  g.alpha = 1.5;
  EXPECT_THROW(g.validate(), InvalidArgument);
  g = GenParams{};
  g.max_tokens = -1;
  EXPECT_THROW(g.validate(), InvalidArgument);
}

TEST(TokenSet, SortsAndDedups) {
  EXPECT_THAT(make_token_set({3, 1, 3, 0}), ElementsAre(0, 1, 3));
}

TEST(RethrowWithIndex, KeepsTypeAndPrefixesMessage) {
  try {
    try {
      throw NumericError("bad value");
    } catch (...) {
      rethrow_with_index("element", 4);
    }
  } catch (const NumericError& e) {
    EXPECT_EQ(std::string(e.what()), "element 4: bad value");
    return;
  }
  FAIL() << "expected NumericError";
}

}  // namespace
