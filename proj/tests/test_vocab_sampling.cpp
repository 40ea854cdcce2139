#include <cmath>
#include <map>
#include <set>

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "prefsteer/sampling.hpp"
#include "prefsteer/vocab.hpp"

using namespace prefsteer;
using ::testing::ElementsAre;

namespace {

TEST(Vocabulary, EncodeDecodeRoundTrip) {
  const Vocabulary v({"<end>", "a", "b", "c"});
  EXPECT_EQ(v.size(), 4u);
  EXPECT_EQ(v.end_id(), 0);
  EXPECT_FALSE(v.unk_id().has_value());
  const auto toks = v.encode("  a b\tc\na ");
  EXPECT_THAT(toks, ElementsAre(1, 2, 3, 1));
  EXPECT_EQ(v.decode(toks), "a b c a");
  EXPECT_THROW(v.encode("a zzz"), InvalidArgument);
}

TEST(Vocabulary, UnknownWordsMapToUnk) {
  const Vocabulary v({"<end>", "<unk>", "hello"});
  EXPECT_EQ(v.unk_id(), 1);
  EXPECT_THAT(v.encode("hello there"), ElementsAre(2, 1));
}

TEST(Vocabulary, RejectsBadLists) {
  EXPECT_THROW(Vocabulary(std::vector<std::string>{}), InvalidArgument);
  EXPECT_THROW(Vocabulary({"a", "a"}), InvalidArgument);
  EXPECT_THROW(Vocabulary({"a b"}), InvalidArgument);
  EXPECT_THROW(Vocabulary({"a"}, std::string("missing")), InvalidArgument);
}

TEST(Vocabulary, CustomOrNoEndToken) {
  const Vocabulary custom({"x", "stop"}, std::string("stop"));
  EXPECT_EQ(custom.end_id(), 1);
  const Vocabulary none({"<end>", "x"}, std::string());
  EXPECT_FALSE(none.end_id().has_value());
}

TEST(Vocabulary, CheckAndLookup) {
  const Vocabulary v({"a", "b"});
  EXPECT_NO_THROW(v.check(TokenSeq{0, 1}));
  EXPECT_THROW(v.check(TokenSeq{2}), InvalidArgument);
  EXPECT_THROW(v.check(TokenSeq{-1}), InvalidArgument);
  EXPECT_EQ(v.id("b"), 1);
  EXPECT_FALSE(v.find("c").has_value());
  EXPECT_THROW(v.token(5), InvalidArgument);
}

TEST(Vocabulary, FingerprintDependsOnTokens) {
  EXPECT_EQ(Vocabulary({"a", "b"}).fingerprint(), Vocabulary({"a", "b"}).fingerprint());
  EXPECT_NE(Vocabulary({"a", "b"}).fingerprint(), Vocabulary({"b", "a"}).fingerprint());
  EXPECT_NE(Vocabulary({"ab"}).fingerprint(), Vocabulary({"a", "b"}).fingerprint());
}

TEST(Seeds, DerivedStreamsDiffer) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 4; ++s) {
    for (std::uint64_t i = 0; i < 250; ++i) seen.insert(derive_seed(s, i));
  }
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(derive_seed(9, 3), derive_seed(9, 3));
}

TEST(Rng, UniformInUnitIntervalAndReproducible) {
  Rng a(42), b(42);
  double sum = 0;
  for (int i = 0; i < 10000; ++i) {
    const double x = a.uniform();
    ASSERT_GE(x, 0.0);
    ASSERT_LT(x, 1.0);
    ASSERT_EQ(x, b.uniform());
    sum += x;
  }
  EXPECT_NEAR(sum / 10000, 0.5, 0.02);
}

TEST(Nucleus, PointMass) {
  const auto d = TokenDistribution::from_probs({1.0, 0.0, 0.0});
  EXPECT_THAT(nucleus_support(d, 0.95), ElementsAre(0));
  GenParams g;
  Rng rng(1);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(sample_token(d, g, rng), 0);
}

TEST(Nucleus, SmallestPrefixReachingP) {
  const auto d = TokenDistribution::from_probs({0.6, 0.3, 0.1});
  EXPECT_THAT(nucleus_support(d, 0.5), ElementsAre(0));
  EXPECT_THAT(nucleus_support(d, 0.6), ElementsAre(0));
  EXPECT_THAT(nucleus_support(d, 0.85), ElementsAre(0, 1));
  EXPECT_THAT(nucleus_support(d, 0.9), ElementsAre(0, 1));
  EXPECT_THAT(nucleus_support(d, 1.0), ElementsAre(0, 1, 2));
  GenParams g;
  g.nucleus_p = 0.5;
  Rng rng(7);
  for (int i = 0; i < 200; ++i) EXPECT_EQ(sample_token(d, g, rng), 0);
}

TEST(Nucleus, TiesKeepLowerIndexFirst) {
  const auto d = TokenDistribution::from_probs({0.2, 0.4, 0.4});
  EXPECT_THAT(nucleus_support(d, 0.3), ElementsAre(1));
}

TEST(Nucleus, ExcludesZeroProbabilityTokens) {
  const auto d = TokenDistribution::from_probs({0.5, 0.0, 0.5});
  EXPECT_THAT(nucleus_support(d, 1.0), ElementsAre(0, 2));
}

TEST(SampleToken, GreedyLowestIndexTie) {
  GenParams g;
  g.greedy = true;
  Rng rng(0);
  EXPECT_EQ(sample_token(TokenDistribution::from_probs({0.4, 0.4, 0.2}), g, rng), 0);
  EXPECT_EQ(sample_token(TokenDistribution::from_probs({0.1, 0.2, 0.7}), g, rng), 2);
}

// Empirical frequencies against the analytic nucleus+temperature distribution.
void expect_frequencies(const std::vector<double>& probs, double p, double temperature,
                        const std::vector<double>& expected) {
  const auto d = TokenDistribution::from_probs(probs);
  GenParams g;
  g.nucleus_p = p;
  g.temperature = temperature;
  Rng rng(2024);
  const int n = 200000;
  std::vector<int> counts(probs.size(), 0);
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_token(d, g, rng))];
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double se = std::sqrt(expected[i] * (1 - expected[i]) / n);
    EXPECT_NEAR(static_cast<double>(counts[i]) / n, expected[i], 5 * se + 1e-12) << "token " << i;
  }
}

TEST(SampleToken, MatchesDistribution) {
  expect_frequencies({0.5, 0.3, 0.2}, 1.0, 1.0, {0.5, 0.3, 0.2});
}

TEST(SampleToken, NucleusRenormalizes) {
  // p = 0.8 keeps {0, 1}: 0.5/0.8, 0.3/0.8.
  expect_frequencies({0.5, 0.3, 0.2}, 0.8, 1.0, {0.625, 0.375, 0.0});
}

TEST(SampleToken, TemperatureAppliedAfterNucleus) {
  // T = 0.5 squares the kept probabilities: 0.25 : 0.09.
  expect_frequencies({0.5, 0.3, 0.2}, 0.8, 0.5, {0.25 / 0.34, 0.09 / 0.34, 0.0});
}

TEST(SampleToken, SeededDeterminism) {
  const auto d = TokenDistribution::from_probs({0.25, 0.25, 0.25, 0.25});
  GenParams g;
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_token(d, g, a), sample_token(d, g, b));
}

}  // namespace
